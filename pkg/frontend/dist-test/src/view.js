/**
 * DOM rendering for the rating console: before image on the left, after
 * image on the right, explanation underneath, then the two 5-point scales.
 * Keyboard keys 1-5 score the focused scale and move focus onward.
 */
const CRITERIA = [
    {
        dimension: 'truthfulness',
        label: 'Truthfulness',
        definition: 'Is it free from false information?',
    },
    {
        dimension: 'informativeness',
        label: 'Informativeness',
        definition: 'Does it describe detailed information or features of the image?',
    },
];
export class ConsoleView {
    root;
    session;
    focusedDimension = 'truthfulness';
    imageFailures = new Set();
    constructor(root, session) {
        this.root = root;
        this.session = session;
        this.session.subscribe(() => this.render());
        document.addEventListener('keydown', (event) => this.onKeyDown(event));
    }
    render() {
        const state = this.session.getState();
        this.root.replaceChildren();
        switch (state.phase) {
            case 'idle':
            case 'loading':
                this.root.append(el('p', 'status', 'Loading the next task…'));
                break;
            case 'error':
                this.renderError(state);
                break;
            case 'complete':
                this.renderComplete(state);
                break;
            default:
                this.renderTask(state);
        }
    }
    renderError(state) {
        this.root.append(el('p', 'banner banner-error', state.banner ?? 'Something went wrong.'));
        const retry = el('button', 'retry', 'Retry');
        retry.addEventListener('click', () => void this.session.retry());
        this.root.append(retry);
    }
    renderComplete(state) {
        this.root.append(el('h2', 'done-title', 'All tasks rated. Thank you!'));
        const summary = state.summary;
        if (summary) {
            this.root.append(el('p', 'summary', `Run summary over ${summary.run.n_items} items: ` +
                `truthfulness ${summary.run.mean_truthfulness.toFixed(2)}, ` +
                `informativeness ${summary.run.mean_informativeness.toFixed(2)}` +
                (summary.pearson_r === null ? '' : `, r ${summary.pearson_r.toFixed(3)}`)));
        }
    }
    renderTask(state) {
        const task = state.task;
        if (!task)
            return;
        this.root.append(el('p', 'progress', `Task ${state.progress.done + 1} of ${state.progress.total}`));
        if (state.banner) {
            this.root.append(el('p', 'banner banner-warning', state.banner));
        }
        const pairBox = el('div', 'image-pair');
        pairBox.append(this.imagePanel(task.image_before_url, 'Before', 'before'), this.imagePanel(task.image_after_url, 'After', 'after'));
        this.root.append(pairBox);
        this.root.append(el('p', 'explanation', task.explanation));
        for (const criterion of CRITERIA) {
            this.root.append(this.scaleRow(state, criterion.dimension, criterion.label, criterion.definition));
        }
        const submit = el('button', 'submit', 'Submit');
        submit.disabled = !this.session.canSubmit() || state.phase === 'submitting';
        submit.addEventListener('click', () => void this.session.submit());
        this.root.append(submit);
        this.root.append(el('p', 'hint', 'Keys 1-5 rate the highlighted scale; Tab switches scales.'));
    }
    imagePanel(url, caption, side) {
        const panel = el('figure', `image-panel image-${side}`);
        if (this.imageFailures.has(url)) {
            panel.append(el('p', 'image-error', `The ${caption.toLowerCase()} image failed to load.`));
            const retry = el('button', 'retry-image', 'Retry image');
            retry.addEventListener('click', () => {
                this.imageFailures.delete(url);
                this.render();
            });
            panel.append(retry);
        }
        else {
            const img = el('img', 'satellite');
            img.src = url;
            img.alt = `${caption} image`;
            img.addEventListener('error', () => {
                this.imageFailures.add(url);
                this.render();
            });
            panel.append(img);
        }
        panel.append(el('figcaption', 'image-caption', caption));
        return panel;
    }
    scaleRow(state, dimension, label, definition) {
        const row = el('div', `scale scale-${dimension}`);
        if (dimension === this.focusedDimension)
            row.classList.add('scale-focused');
        row.addEventListener('click', () => {
            this.focusedDimension = dimension;
            this.render();
        });
        const name = el('span', 'scale-label', label);
        name.title = definition;
        row.append(name);
        for (let value = 1; value <= 5; value += 1) {
            const button = el('button', 'score', String(value));
            if (state.scores[dimension] === value)
                button.classList.add('score-selected');
            button.addEventListener('click', (event) => {
                event.stopPropagation();
                this.focusedDimension = dimension;
                this.session.setScore(dimension, value);
            });
            row.append(button);
        }
        return row;
    }
    onKeyDown(event) {
        const state = this.session.getState();
        if (state.phase !== 'rating')
            return;
        const value = Number.parseInt(event.key, 10);
        if (value >= 1 && value <= 5) {
            this.session.setScore(this.focusedDimension, value);
            if (this.focusedDimension === 'truthfulness') {
                this.focusedDimension = 'informativeness';
                this.render();
            }
            event.preventDefault();
        }
        else if (event.key === 'Tab') {
            this.focusedDimension =
                this.focusedDimension === 'truthfulness' ? 'informativeness' : 'truthfulness';
            this.render();
            event.preventDefault();
        }
        else if (event.key === 'Enter' && this.session.canSubmit()) {
            void this.session.submit();
            event.preventDefault();
        }
    }
}
function el(tag, className, text) {
    const node = document.createElement(tag);
    node.className = className;
    if (text !== undefined)
        node.textContent = text;
    return node;
}
