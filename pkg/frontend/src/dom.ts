/** DOM adapter: mirrors the pure view model into actual elements. */

import { RenderedControl, renderControls, renderGenerate, specPaneLines } from './render.js';
import { SessionController } from './store.js';

export interface Ui {
	refresh(): void;
}

export function mountUi(controller: SessionController, root: Document): Ui {
	const widgetPane = root.getElementById('widgets')!;
	const specPane = root.getElementById('spec-pane')!;
	const modalHost = root.getElementById('modal-host')!;
	const banner = root.getElementById('banner')!;
	const generateButton = root.getElementById('generate') as HTMLButtonElement;
	const undoButton = root.getElementById('undo') as HTMLButtonElement;
	const policySelect = root.getElementById('policy') as HTMLSelectElement;
	const manifestPane = root.getElementById('manifest')!;

	const onToggle = async (control: RenderedControl) => {
		const inRadio = control.kind === 'radio';
		const ok = await controller.decide(control.ref, controller.nextValueFor(control.ref, inRadio));
		if (ok) {
			await controller.refreshSpec();
		}
		refresh();
	};

	const renderControlRow = (control: RenderedControl): HTMLElement => {
		const row = root.createElement('div');
		row.className = `control ${control.kind}`;
		row.style.marginLeft = `${control.depth * 16}px`;
		if (control.kind === 'checkbox' || control.kind === 'radio') {
			const label = root.createElement('label');
			const input = root.createElement('input');
			input.type = control.kind === 'radio' ? 'radio' : 'checkbox';
			if (control.kind === 'radio' && control.groupRef) {
				input.name = control.groupRef;
			}
			input.checked = control.checked;
			input.disabled = control.disabled || controller.state.pending;
			input.dataset.ref = control.ref;
			input.addEventListener('click', (event) => {
				event.preventDefault(); // no optimistic toggling; wait for the service
				if (!input.disabled) {
					void onToggle(control);
				}
			});
			label.append(input, ` ${control.label}`);
			row.append(label);
		} else {
			row.textContent = control.label;
			if (control.kind === 'error') {
				row.classList.add('error-placeholder');
			}
		}
		if (control.annotation) {
			const note = root.createElement('small');
			note.textContent = ` (${control.annotation})`;
			row.append(note);
		}
		return row;
	};

	const refresh = (): void => {
		widgetPane.replaceChildren(...renderControls(controller.state).map(renderControlRow));
		specPane.textContent = specPaneLines(controller.state).join('\n');
		banner.textContent = controller.state.banner ?? '';
		banner.hidden = !controller.state.banner;

		const generateView = renderGenerate(controller.state, controller.generateEnabled());
		generateButton.disabled = !generateView.enabled || controller.state.pending;
		manifestPane.replaceChildren();
		if (generateView.manifest) {
			const caption = root.createElement('div');
			caption.textContent = `generated under ${generateView.outputDir}`;
			manifestPane.append(caption);
			for (const entry of generateView.manifest) {
				const line = root.createElement('div');
				line.textContent = `${entry.path}\t${entry.bytes}\t${entry.digest.slice(0, 12)}`;
				manifestPane.append(line);
			}
		} else if (!generateView.enabled && generateView.obligations.length) {
			const caption = root.createElement('div');
			caption.textContent = `open obligations: ${generateView.obligations.join(' | ')}`;
			manifestPane.append(caption);
		}

		modalHost.replaceChildren();
		const modal = controller.state.modal;
		if (modal) {
			const box = root.createElement('div');
			box.className = 'modal';
			const title = root.createElement('h3');
			title.textContent = modal.title;
			box.append(title);
			for (const line of modal.lines) {
				const p = root.createElement('div');
				p.textContent = line;
				box.append(p);
			}
			const close = root.createElement('button');
			close.textContent = 'Close';
			close.addEventListener('click', () => {
				controller.dismissModal();
				refresh();
			});
			box.append(close);
			if (modal.offerUndo) {
				const undo = root.createElement('button');
				undo.textContent = 'Undo';
				undo.addEventListener('click', async () => {
					controller.dismissModal();
					await controller.undo();
					await controller.refreshSpec();
					refresh();
				});
				box.append(undo);
			}
			modalHost.append(box);
		}
	};

	undoButton.addEventListener('click', async () => {
		await controller.undo();
		await controller.refreshSpec();
		refresh();
	});
	policySelect.addEventListener('change', () => {
		controller.setPolicy(policySelect.value === 'default-off' ? 'default-off' : 'strict');
		refresh();
	});
	generateButton.addEventListener('click', async () => {
		await controller.generate();
		refresh();
	});

	return { refresh };
}
