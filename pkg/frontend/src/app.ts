/** Browser entry point: session form, then the specialization dialog. */

import { HttpTransport } from './client.js';
import { mountUi } from './dom.js';
import { SessionController } from './store.js';

export function boot(doc: Document): void {
	const controller = new SessionController(new HttpTransport(''));
	const ui = mountUi(controller, doc);

	const form = doc.getElementById('session-form') as HTMLFormElement;
	form.addEventListener('submit', async (event) => {
		event.preventDefault();
		const sources = {
			model: (doc.getElementById('model-src') as HTMLTextAreaElement).value,
			frames: (doc.getElementById('frames-src') as HTMLTextAreaElement).value,
			rules: (doc.getElementById('rules-src') as HTMLTextAreaElement).value,
		};
		const ok = await controller.createSession(sources);
		if (ok) {
			(doc.getElementById('setup') as HTMLElement).hidden = true;
			(doc.getElementById('workbench') as HTMLElement).hidden = false;
			await controller.refreshSpec();
		}
		ui.refresh();
	});

	ui.refresh();
}

declare global {
	interface Window {
		fmgenBoot: (doc: Document) => void;
	}
}

if (typeof window !== 'undefined') {
	window.fmgenBoot = boot;
	window.addEventListener('DOMContentLoaded', () => boot(document));
}
