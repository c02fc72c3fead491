import { SessionApi } from './api.js';
import { ElicitApp } from './app.js';

const root = document.getElementById('app');
if (!root) throw new Error('missing #app element');
void new ElicitApp(root, new SessionApi()).start();
