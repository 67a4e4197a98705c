// Thin client for the inference service. The transport is injectable so the
// whole submit path is testable against a stub without a network.

export type Transport = (url: string, init?: RequestInit) => Promise<Response>;

export interface HealthInfo {
  status: string;
  checkpoint: string;
  input_side: number;
}

export interface MetaInfo {
  input_side: number;
  sigma: number;
  checkpoint: string;
  scenario_presets: Record<string, Record<string, unknown>>;
  mask_convention: { format: string; missing_value: number; valid_value: number };
}

export interface InpaintResult {
  bytes: Uint8Array;
  contentType: string;
  inferenceMs: number | null;
}

export class ServiceError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let code = "http_error";
  let message = `${resp.status}`;
  try {
    const body = (await resp.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body, keep the status text
  }
  throw new ServiceError(resp.status, code, message);
}

export class InpaintClient {
  private base: string;
  private transport: Transport;

  constructor(baseUrl: string, transport?: Transport) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.transport = transport ?? ((url, init) => fetch(url, init));
  }

  async health(): Promise<HealthInfo> {
    const resp = await this.transport(`${this.base}/health`);
    await raiseForStatus(resp);
    return (await resp.json()) as HealthInfo;
  }

  async meta(): Promise<MetaInfo> {
    const resp = await this.transport(`${this.base}/meta`);
    await raiseForStatus(resp);
    return (await resp.json()) as MetaInfo;
  }

  async inpaint(
    image: Blob,
    maskPng: Uint8Array,
    opts: { seed?: number; grid?: boolean } = {},
  ): Promise<InpaintResult> {
    const form = new FormData();
    form.append("image", image, "image.png");
    form.append("mask", new Blob([maskPng as BlobPart], { type: "image/png" }), "mask.png");
    if (opts.seed !== undefined) form.append("seed", String(opts.seed));
    const url = `${this.base}/inpaint${opts.grid ? "?grid=1" : ""}`;
    const resp = await this.transport(url, { method: "POST", body: form });
    await raiseForStatus(resp);
    const buf = new Uint8Array(await resp.arrayBuffer());
    const ms = resp.headers.get("X-Inference-Time-Ms");
    return {
      bytes: buf,
      contentType: resp.headers.get("Content-Type") ?? "image/png",
      inferenceMs: ms === null ? null : Number(ms),
    };
  }
}
