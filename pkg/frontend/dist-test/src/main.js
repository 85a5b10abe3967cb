import { RatingApi } from './api.js';
import { ConsoleSession } from './state.js';
import { ConsoleView } from './view.js';
function bootstrap() {
    const root = document.getElementById('console');
    if (!root)
        throw new Error('missing #console element');
    const params = new URLSearchParams(window.location.search);
    const runId = params.get('run');
    const annotatorId = params.get('annotator');
    if (!runId || !annotatorId) {
        renderStartForm(root, runId ?? '', annotatorId ?? '');
        return;
    }
    const api = new RatingApi('');
    const session = new ConsoleSession(api, runId, annotatorId);
    const view = new ConsoleView(root, session);
    view.render();
    void session.start();
}
function renderStartForm(root, runId, annotatorId) {
    root.replaceChildren();
    const form = document.createElement('form');
    form.className = 'start-form';
    form.innerHTML = `
    <h2>Rating console</h2>
    <label>Run id <input name="run" required value="${escapeAttr(runId)}"></label>
    <label>Annotator <input name="annotator" required value="${escapeAttr(annotatorId)}"></label>
    <button type="submit">Start rating</button>
  `;
    form.addEventListener('submit', (event) => {
        event.preventDefault();
        const data = new FormData(form);
        const next = new URLSearchParams({
            run: String(data.get('run') ?? ''),
            annotator: String(data.get('annotator') ?? ''),
        });
        window.location.search = next.toString();
    });
    root.append(form);
}
function escapeAttr(value) {
    return value.replace(/&/g, '&amp;').replace(/"/g, '&quot;').replace(/</g, '&lt;');
}
bootstrap();
