import { HttpApi } from './api';
import { createConsole } from './console';

const root = document.getElementById('console-root');
if (!root) throw new Error('missing #console-root');
createConsole(root, new HttpApi());
