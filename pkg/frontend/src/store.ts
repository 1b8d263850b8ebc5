/**
 * Session controller: holds the view state and talks to the service.
 *
 * Every control state shown to the user comes from the latest service
 * response; there is no optimistic update and no client-side constraint
 * logic.  Conflicts open one modal and change nothing else.  At most one
 * request is in flight; controls are locked while pending.
 */

import { Transport, WireResponse } from './client.js';
import {
	ConflictPayload,
	DecisionResponse,
	FeatureState,
	GenerateResponse,
	ManifestEntry,
	NotificationPayload,
	Policy,
	SessionState,
	SessionStatus,
	UndoResponse,
	WidgetTree,
} from './protocol.js';

export interface Modal {
	kind: 'conflict' | 'notification';
	title: string;
	lines: string[];
	offerUndo: boolean;
}

export interface ViewState {
	sessionId: string | null;
	tree: WidgetTree | null;
	states: Record<string, FeatureState>;
	enablement: Record<string, boolean>;
	status: SessionStatus;
	specText: string;
	manifest: ManifestEntry[] | null;
	outputDir: string | null;
	modal: Modal | null;
	banner: string | null;
	pending: boolean;
	policy: Policy;
}

export function initialViewState(): ViewState {
	return {
		sessionId: null,
		tree: null,
		states: {},
		enablement: {},
		status: { complete: false, obligations: [] },
		specText: '',
		manifest: null,
		outputDir: null,
		modal: null,
		banner: null,
		pending: false,
		policy: 'strict',
	};
}

export interface SessionSources {
	model: string;
	frames: string;
	rules: string;
}

export class SessionController {
	readonly state: ViewState = initialViewState();
	/** Total modals ever opened; contract tests assert on this. */
	modalsOpened = 0;

	constructor(private transport: Transport) {}

	private applySessionState(payload: SessionState): void {
		this.state.sessionId = payload.id;
		this.state.tree = payload.widgets;
		this.state.states = payload.states;
		this.state.enablement = payload.enablement;
		this.state.status = payload.status;
	}

	private openModal(modal: Modal): void {
		this.state.modal = modal;
		this.modalsOpened += 1;
	}

	dismissModal(): void {
		this.state.modal = null;
	}

	setPolicy(policy: Policy): void {
		this.state.policy = policy;
	}

	/** True when the generate action may be offered at all. */
	generateEnabled(): boolean {
		return this.state.status.complete || this.state.policy === 'default-off';
	}

	featureOf(ref: string): string | null {
		const m = /^feature:(.+)$/.exec(ref);
		return m ? m[1] : null;
	}

	/** The decision a click on a control requests, given its current state. */
	nextValueFor(ref: string, inRadioGroup: boolean): FeatureState {
		const feature = this.featureOf(ref);
		const current = feature ? this.state.states[feature] : undefined;
		if (inRadioGroup) {
			return 'selected';
		}
		return current === 'selected' ? 'deselected' : 'selected';
	}

	private async guarded<T>(work: () => Promise<T>): Promise<T | null> {
		if (this.state.pending) {
			return null;
		}
		this.state.pending = true;
		this.state.banner = null;
		try {
			return await work();
		} catch (error) {
			this.state.banner = `network failure: ${String(error)}`;
			return null;
		} finally {
			this.state.pending = false;
		}
	}

	async createSession(sources: SessionSources): Promise<boolean> {
		const outcome = await this.guarded(async () => {
			const response = await this.transport.send('POST', '/sessions', sources);
			if (response.status !== 200) {
				this.state.banner = describeError(response);
				return false;
			}
			this.applySessionState(response.body as SessionState);
			return true;
		});
		return outcome === true;
	}

	/**
	 * Posts a decision.  Returns false without any request when the
	 * control is disabled, unknown, or another request is pending.
	 */
	async decide(ref: string, value: FeatureState): Promise<boolean> {
		const feature = this.featureOf(ref);
		if (!feature || !this.state.enablement[ref] || this.state.pending || !this.state.sessionId) {
			return false;
		}
		const outcome = await this.guarded(async () => {
			const response = await this.transport.send(
				'POST',
				`/sessions/${this.state.sessionId}/decisions`,
				{ feature, value },
			);
			if (response.status === 409) {
				const conflict = response.body as ConflictPayload;
				this.openModal({
					kind: 'conflict',
					title: conflict.rejected
						? `Cannot set ${conflict.rejected.feature} to ${conflict.rejected.value}`
						: 'Decision rejected',
					lines: conflict.reasons,
					offerUndo: false,
				});
				return false;
			}
			if (response.status !== 200) {
				this.state.banner = describeError(response);
				return false;
			}
			const body = response.body as DecisionResponse;
			this.applySessionState(body);
			const crossPanel = body.notifications.filter((n) => n.cross_panel);
			if (crossPanel.length > 0) {
				this.openModal({
					kind: 'notification',
					title: `Selecting ${feature} also changed other panels`,
					lines: crossPanel.flatMap(describeNotification),
					offerUndo: true,
				});
			}
			return true;
		});
		return outcome === true;
	}

	async undo(): Promise<boolean> {
		if (!this.state.sessionId) {
			return false;
		}
		const outcome = await this.guarded(async () => {
			const response = await this.transport.send('POST', `/sessions/${this.state.sessionId}/undo`);
			if (response.status !== 200) {
				this.state.banner = describeError(response);
				return false;
			}
			this.applySessionState(response.body as UndoResponse);
			return true;
		});
		return outcome === true;
	}

	async refreshSpec(): Promise<void> {
		await this.fetchSpec('preview');
	}

	async fetchSpec(mode: 'preview' | 'final'): Promise<void> {
		if (!this.state.sessionId) {
			return;
		}
		await this.guarded(async () => {
			const response = await this.transport.send(
				'GET',
				`/sessions/${this.state.sessionId}/spec?mode=${mode}`,
			);
			if (response.status === 200) {
				this.state.specText = response.text ?? '';
			} else {
				this.state.banner = describeError(response);
			}
		});
	}

	async fetchWidgets(): Promise<void> {
		if (!this.state.sessionId) {
			return;
		}
		await this.guarded(async () => {
			const response = await this.transport.send(
				'GET',
				`/sessions/${this.state.sessionId}/widgets`,
			);
			if (response.status === 200) {
				this.applySessionState(response.body as SessionState);
			}
		});
	}

	async generate(): Promise<boolean> {
		if (!this.state.sessionId || !this.generateEnabled()) {
			return false;
		}
		const outcome = await this.guarded(async () => {
			const response = await this.transport.send(
				'POST',
				`/sessions/${this.state.sessionId}/generate`,
				{ policy: this.state.policy },
			);
			if (response.status !== 200) {
				this.state.banner = describeError(response);
				return false;
			}
			const body = response.body as GenerateResponse;
			this.state.manifest = body.manifest.entries;
			this.state.outputDir = body.output_dir;
			return true;
		});
		return outcome === true;
	}
}

function describeError(response: WireResponse): string {
	const body = response.body as ConflictPayload | undefined;
	if (body && body.message) {
		const reasons = body.reasons && body.reasons.length ? `: ${body.reasons.join('; ')}` : '';
		return `${body.message}${reasons}`;
	}
	return `request failed with status ${response.status}`;
}

function describeNotification(n: NotificationPayload): string[] {
	return n.affected.map((a) => `${a.feature} is now ${a.state} (panel ${n.panel})`);
}
