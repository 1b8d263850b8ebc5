/**
 * Contract tests against recorded service traffic: the UI must end up
 * rendering exactly the states the service reported, open exactly one
 * modal per conflict, and never invent decisions of its own.
 */

import assert from 'node:assert/strict';
import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { test } from 'node:test';
import { fileURLToPath } from 'node:url';

import { FixtureTransport, RecordedStep } from '../src/client.js';
import { FeatureState, SessionState, WidgetNode } from '../src/protocol.js';
import { controlStates, renderControls } from '../src/render.js';
import { SessionController, SessionSources } from '../src/store.js';

const HERE = dirname(fileURLToPath(import.meta.url));

interface Recording {
	name: string;
	steps: RecordedStep[];
}

function loadRecording(name: string): Recording {
	const raw = readFileSync(join(HERE, '..', '..', 'test', 'fixtures', `${name}.json`), 'utf-8');
	return JSON.parse(raw) as Recording;
}

function sourcesOf(recording: Recording): SessionSources {
	return recording.steps[0].request.body as SessionSources;
}

function lastSessionState(recording: Recording): SessionState {
	for (let i = recording.steps.length - 1; i >= 0; i -= 1) {
		const body = recording.steps[i].response.body as SessionState | undefined;
		if (body && body.states && body.enablement) {
			return body;
		}
	}
	throw new Error('recording has no session state');
}

function expectedControlStates(payload: SessionState): Record<string, { checked: boolean; disabled: boolean }> {
	const out: Record<string, { checked: boolean; disabled: boolean }> = {};
	const visit = (node: WidgetNode): void => {
		if (node.kind === 'checkbox') {
			const feature = node.ref.split(':', 2)[1];
			out[node.ref] = {
				checked: payload.states[feature] === 'selected',
				disabled: !payload.enablement[node.ref],
			};
		}
		node.children.forEach(visit);
	};
	visit(payload.widgets.root);
	return out;
}

test('scripted toggle sequence ends in the service state', async () => {
	const recording = loadRecording('view_happy_path');
	const transport = new FixtureTransport(recording.steps);
	const controller = new SessionController(transport);

	assert.ok(await controller.createSession(sourcesOf(recording)));
	await controller.refreshSpec();
	assert.match(controller.state.specText, /value="\?"/);

	assert.ok(await controller.decide('feature:Zoom', 'selected'));
	assert.ok(await controller.decide('feature:ToolBarCheck', 'deselected'));
	assert.ok(await controller.decide('feature:Zoom100', 'selected'));
	assert.ok(await controller.undo());
	assert.ok(await controller.decide('feature:StatusBar', 'deselected'));

	controller.setPolicy('default-off');
	assert.ok(controller.generateEnabled());
	assert.ok(await controller.generate());
	assert.ok(controller.state.manifest && controller.state.manifest.length === 3);

	await controller.fetchWidgets();
	assert.ok(transport.done, `only ${transport.consumed} of ${recording.steps.length} steps used`);

	const rendered = controlStates(controller.state);
	const expected = expectedControlStates(lastSessionState(recording));
	assert.deepEqual(rendered, expected);
});

test('a conflict opens exactly one modal and changes nothing', async () => {
	const recording = loadRecording('conflict_gadget');
	const transport = new FixtureTransport(recording.steps);
	const controller = new SessionController(transport);

	assert.ok(await controller.createSession(sourcesOf(recording)));
	assert.equal(controller.state.enablement['feature:Combo'], true, 'the control is enabled');
	const before = JSON.stringify(controlStates(controller.state));

	const accepted = await controller.decide('feature:Combo', 'selected');
	assert.equal(accepted, false);
	assert.equal(controller.modalsOpened, 1, 'exactly one modal per conflict');
	assert.ok(controller.state.modal);
	assert.equal(controller.state.modal!.kind, 'conflict');
	assert.ok(controller.state.modal!.lines.length > 0);
	assert.equal(JSON.stringify(controlStates(controller.state)), before);

	// the service agrees nothing changed
	controller.dismissModal();
	await controller.fetchWidgets();
	assert.equal(JSON.stringify(controlStates(controller.state)), before);
	assert.equal(controller.modalsOpened, 1);
	assert.ok(transport.done);
});

test('generate button tracks the Complete status', async () => {
	const recording = loadRecording('view_complete_generate');
	const transport = new FixtureTransport(recording.steps);
	const controller = new SessionController(transport);

	assert.ok(await controller.createSession(sourcesOf(recording)));
	assert.equal(controller.state.status.complete, false);
	assert.equal(controller.generateEnabled(), false, 'strict + incomplete must disable generate');

	controller.setPolicy('default-off');
	assert.equal(controller.generateEnabled(), true, 'default-off enables generate regardless');
	controller.setPolicy('strict');

	for (const [feature, value] of [
		['View', 'selected'],
		['ToolBarCheck', 'selected'],
		['StatusBar', 'deselected'],
		['Zoom', 'deselected'],
	] as [string, FeatureState][]) {
		assert.ok(await controller.decide(`feature:${feature}`, value));
	}
	assert.equal(controller.state.status.complete, true);
	assert.equal(controller.generateEnabled(), true);

	await controller.fetchSpec('final');
	assert.match(controller.state.specText, /value="1"/);
	assert.ok(await controller.generate());
	assert.ok(controller.state.manifest);

	const remaining = recording.steps.length - transport.consumed;
	assert.equal(remaining, 1, 'only the session delete stays un-replayed');
});

test('disabled controls never issue requests', async () => {
	const recording = loadRecording('view_happy_path');
	const transport = new FixtureTransport(recording.steps.slice(0, 3));
	const controller = new SessionController(transport);

	assert.ok(await controller.createSession(sourcesOf(recording)));
	await controller.refreshSpec();
	assert.ok(await controller.decide('feature:Zoom', 'selected'));
	// View is now derived-selected with no own decision: control disabled
	assert.equal(controller.state.enablement['feature:View'], false);
	const used = transport.consumed;
	assert.equal(await controller.decide('feature:View', 'deselected'), false);
	assert.equal(await controller.decide('panel:View', 'selected'), false);
	assert.equal(await controller.decide('group:View:0', 'selected'), false);
	assert.equal(transport.consumed, used, 'no request may be sent for disabled controls');
});

test('unknown widget kinds render an error placeholder', () => {
	const controller = new SessionController(new FixtureTransport([]));
	controller.state.tree = {
		root: {
			kind: 'panel',
			ref: 'feature:Root',
			title: 'Root',
			validation: null,
			children: [
				{ kind: 'gizmo', ref: 'feature:X', title: 'X', validation: null, children: [] },
			],
		},
		bindings: [],
		omissions: [],
	};
	const controls = renderControls(controller.state);
	const placeholder = controls.find((c) => c.kind === 'error');
	assert.ok(placeholder, 'unknown kinds must be visible, never dropped');
	assert.match(placeholder!.label, /gizmo/);
});
