/**
 * Wire types for the configuration service (see ../docs/protocol.md).
 * The UI renders exactly what these payloads carry; it adds no
 * constraint logic of its own.
 */

export type FeatureState = 'selected' | 'deselected' | 'undecided';

export interface WidgetNode {
	kind: string; // panel | group_title | checkbox | radio_group | checkbox_group | label
	ref: string;
	title: string | null;
	validation: string | null; // exactly-one | at-least-one
	children: WidgetNode[];
}

export interface WidgetTree {
	root: WidgetNode;
	bindings: { condition: string; widget: string }[];
	omissions: { feature: string; reason: string }[];
}

export interface Obligation {
	kind: string;
	subject: string;
	members: string[];
}

export interface SessionStatus {
	complete: boolean;
	obligations: Obligation[];
}

export interface SessionState {
	id: string;
	widgets: WidgetTree;
	states: Record<string, FeatureState>;
	enablement: Record<string, boolean>;
	status: SessionStatus;
}

export interface ChangedEntry {
	feature: string;
	from: FeatureState;
	to: FeatureState;
}

export interface NotificationPayload {
	trigger: { feature: string; value: FeatureState };
	panel: string;
	cross_panel: boolean;
	affected: { feature: string; state: FeatureState }[];
}

export interface DecisionResponse extends SessionState {
	changed: ChangedEntry[];
	notifications: NotificationPayload[];
}

export interface UndoResponse extends SessionState {
	retracted: string;
}

export interface ConflictPayload {
	code: string;
	message: string;
	reasons: string[];
	rejected?: { feature: string; value: FeatureState };
}

export interface ManifestEntry {
	path: string;
	bytes: number;
	digest: string;
}

export interface GenerateResponse {
	output_dir: string;
	manifest: { inputs: string; entries: ManifestEntry[] };
}

export type Policy = 'strict' | 'default-off';
