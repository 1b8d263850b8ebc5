/**
 * Pure view model: widget tree + states + enablement in, flat list of
 * renderable controls out.  The DOM layer only mirrors this structure,
 * which is what the headless contract tests assert on.
 */

import { WidgetNode } from './protocol.js';
import { ViewState } from './store.js';

export interface RenderedControl {
	ref: string;
	feature: string | null;
	kind: 'panel' | 'group-title' | 'checkbox' | 'radio' | 'caption' | 'error';
	label: string;
	checked: boolean;
	disabled: boolean;
	depth: number;
	groupRef: string | null;
	annotation: string | null;
}

const GROUP_ANNOTATIONS: Record<string, string> = {
	'exactly-one': 'choose exactly one',
	'at-least-one': 'choose at least one',
};

export function renderControls(state: ViewState): RenderedControl[] {
	if (!state.tree) {
		return [];
	}
	const out: RenderedControl[] = [];

	const featureOf = (ref: string): string | null => {
		const m = /^(?:feature|panel):(.+)$/.exec(ref);
		return m ? m[1] : null;
	};

	const visit = (node: WidgetNode, depth: number, groupRef: string | null): void => {
		const feature = featureOf(node.ref);
		const base = {
			ref: node.ref,
			feature,
			depth,
			groupRef,
			annotation: node.validation ? GROUP_ANNOTATIONS[node.validation] ?? node.validation : null,
		};
		switch (node.kind) {
			case 'panel':
				out.push({ ...base, kind: 'panel', label: node.title ?? '', checked: false, disabled: true });
				node.children.forEach((c) => visit(c, depth + 1, null));
				return;
			case 'group_title':
				out.push({ ...base, kind: 'group-title', label: node.title ?? '', checked: false, disabled: true });
				node.children.forEach((c) => visit(c, depth + 1, null));
				return;
			case 'label':
				out.push({ ...base, kind: 'caption', label: node.title ?? '', checked: false, disabled: true });
				return;
			case 'checkbox': {
				const checked = feature ? state.states[feature] === 'selected' : false;
				const disabled = !state.enablement[node.ref];
				out.push({
					...base,
					kind: groupRef && groupRef.startsWith('radio:') ? 'radio' : 'checkbox',
					label: node.title ?? '',
					checked,
					disabled,
				});
				node.children.forEach((c) => visit(c, depth + 1, null));
				return;
			}
			case 'radio_group':
				out.push({ ...base, kind: 'caption', label: node.title ?? '', checked: false, disabled: true });
				node.children.forEach((c) => visit(c, depth + 1, `radio:${node.ref}`));
				return;
			case 'checkbox_group':
				out.push({ ...base, kind: 'caption', label: node.title ?? '', checked: false, disabled: true });
				node.children.forEach((c) => visit(c, depth + 1, node.ref));
				return;
			default:
				// never drop a widget silently
				out.push({
					...base,
					kind: 'error',
					label: `unknown widget kind "${node.kind}" (${node.ref})`,
					checked: false,
					disabled: true,
				});
		}
	};

	visit(state.tree.root, 0, null);
	return out;
}

/** Control states keyed by ref, for comparisons against service state. */
export function controlStates(state: ViewState): Record<string, { checked: boolean; disabled: boolean }> {
	const out: Record<string, { checked: boolean; disabled: boolean }> = {};
	for (const control of renderControls(state)) {
		if (control.kind === 'checkbox' || control.kind === 'radio') {
			out[control.ref] = { checked: control.checked, disabled: control.disabled };
		}
	}
	return out;
}

export function specPaneLines(state: ViewState): string[] {
	return state.specText ? state.specText.replace(/\n$/, '').split('\n') : [];
}

export interface GenerateView {
	enabled: boolean;
	obligations: string[];
	manifest: { path: string; bytes: number; digest: string }[] | null;
	outputDir: string | null;
}

export function renderGenerate(state: ViewState, enabled: boolean): GenerateView {
	return {
		enabled,
		obligations: state.status.obligations.map(
			(ob) => `${ob.kind}: ${ob.subject}${ob.members.length ? ` {${ob.members.join(', ')}}` : ''}`,
		),
		manifest: state.manifest,
		outputDir: state.outputDir,
	};
}
