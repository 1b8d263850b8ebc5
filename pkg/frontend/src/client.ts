/**
 * Transport abstraction: the real client speaks HTTP via fetch; tests
 * replay recorded request/response fixtures with strict matching, so a
 * contract test fails the moment the UI sends anything unexpected.
 */

export interface WireResponse {
	status: number;
	body?: unknown;
	text?: string;
}

export interface WireRequest {
	method: string;
	path: string;
	body: unknown | null;
}

export interface Transport {
	send(method: string, path: string, body?: unknown): Promise<WireResponse>;
}

export class HttpTransport implements Transport {
	constructor(private baseUrl: string = '') {}

	async send(method: string, path: string, body?: unknown): Promise<WireResponse> {
		const response = await fetch(this.baseUrl + path, {
			method,
			headers: body !== undefined ? { 'Content-Type': 'application/json' } : undefined,
			body: body !== undefined ? JSON.stringify(body) : undefined,
		});
		const contentType = response.headers.get('Content-Type') ?? '';
		if (contentType.includes('json')) {
			return { status: response.status, body: await response.json() };
		}
		return { status: response.status, text: await response.text() };
	}
}

export interface RecordedStep {
	request: WireRequest;
	response: WireResponse;
}

/** Replays a recording; the placeholder SID stands for the session id. */
export class FixtureTransport implements Transport {
	private cursor = 0;
	private sessionId: string | null = null;

	constructor(private steps: RecordedStep[]) {}

	get consumed(): number {
		return this.cursor;
	}

	get done(): boolean {
		return this.cursor >= this.steps.length;
	}

	async send(method: string, path: string, body?: unknown): Promise<WireResponse> {
		if (this.cursor >= this.steps.length) {
			throw new Error(`unexpected request beyond recording: ${method} ${path}`);
		}
		const step = this.steps[this.cursor];
		const expectedPath = this.sessionId
			? step.request.path.replace(/SID/g, this.sessionId)
			: step.request.path;
		const sentBody = body === undefined ? null : body;
		if (step.request.method !== method || expectedPath !== path) {
			throw new Error(
				`request mismatch at step ${this.cursor}: expected ` +
				`${step.request.method} ${expectedPath}, got ${method} ${path}`,
			);
		}
		if (JSON.stringify(step.request.body) !== JSON.stringify(sentBody)) {
			throw new Error(`request body mismatch at step ${this.cursor} (${method} ${path})`);
		}
		this.cursor += 1;
		const response = step.response;
		const responseBody = response.body as { id?: string } | undefined;
		if (this.sessionId === null && responseBody && typeof responseBody.id === 'string') {
			this.sessionId = responseBody.id === 'SID' ? 'SID' : responseBody.id;
		}
		return response;
	}
}
