import 'katex/dist/katex.min.css';
import './styles.css';

import { GradingApi } from './api';
import { mountApp } from './app';

const root = document.getElementById('app');
if (root === null) throw new Error('missing #app root element');

mountApp({ root, api: new GradingApi() }).catch((err) => {
  root.textContent = `Failed to load: ${err instanceof Error ? err.message : err}`;
});
