// Single-page mask studio: load an image, paint what should disappear,
// submit to the inference service, compare completions.

import { InpaintClient, MetaInfo, ServiceError } from "./api";
import { MaskEditor, diffOutsideMask } from "./mask";

type Tool = "brush" | "rectangle";

interface Attempt {
  seed: number | null;
  url: string;
  label: string;
}

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

let client: InpaintClient | null = null;
let meta: MetaInfo | null = null;
let editor: MaskEditor | null = null;
let baseImage: ImageBitmap | null = null;
let baseRgba: Uint8Array | null = null;
let tool: Tool = "brush";
let busy = false;
let dragStart: { r: number; c: number } | null = null;
let stroking = false;
const attempts: Attempt[] = [];

function status(text: string, isError = false): void {
  const el = $("status");
  el.textContent = text;
  el.className = isError ? "status error" : "status";
}

function canvas(): HTMLCanvasElement {
  return $("editor-canvas");
}

function redraw(): void {
  if (!baseImage || !editor) return;
  const cv = canvas();
  const ctx = cv.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, cv.width, cv.height);
  ctx.drawImage(baseImage, 0, 0, cv.width, cv.height);
  const scale = cv.width / editor.width;
  ctx.fillStyle = "rgba(220, 38, 38, 0.55)";
  for (let r = 0; r < editor.height; r++) {
    let c = 0;
    while (c < editor.width) {
      if (editor.bits[r * editor.width + c] === 0) {
        let end = c;
        while (end < editor.width && editor.bits[r * editor.width + end] === 0) end++;
        ctx.fillRect(c * scale, r * scale, (end - c) * scale, scale);
        c = end;
      } else {
        c++;
      }
    }
  }
  $("missing-frac").textContent = `${(editor.missingFraction() * 100).toFixed(1)}% missing`;
}

async function connect(): Promise<void> {
  const url = ($("service-url") as HTMLInputElement).value.trim();
  client = new InpaintClient(url);
  try {
    const health = await client.health();
    meta = await client.meta();
    status(`connected, model side ${health.input_side}, checkpoint ${health.checkpoint.slice(0, 12)}`);
    renderPresetButtons();
  } catch (err) {
    client = null;
    meta = null;
    status(`connection failed: ${(err as Error).message}`, true);
  }
}

function renderPresetButtons(): void {
  const host = $("presets");
  host.textContent = "";
  if (!meta) return;
  for (const name of Object.keys(meta.scenario_presets)) {
    const btn = document.createElement("button");
    btn.textContent = name;
    btn.addEventListener("click", () => applyPreset(name));
    host.appendChild(btn);
  }
}

function applyPreset(name: string): void {
  if (!editor || !meta) return;
  const spec = meta.scenario_presets[name] as {
    kind?: string;
    params?: Record<string, number>;
  };
  const params = spec.params ?? {};
  const seed = Number(($("noise-seed") as HTMLInputElement).value) || 0;
  const kind = String(spec.kind ?? name);
  if (kind.includes("noise")) {
    const fallback = Number(($("noise-p") as HTMLInputElement).value);
    editor.presetNoise(params.p !== undefined ? params.p : fallback, seed);
  } else if (kind.includes("multi")) {
    editor.presetMultiSquare(params.count ?? 5, params.side ?? 31, seed);
  } else {
    editor.presetCenterSquare(params.side ?? Math.floor(editor.width / 2));
  }
  redraw();
}

function canvasPos(ev: MouseEvent): { r: number; c: number } {
  const cv = canvas();
  const rect = cv.getBoundingClientRect();
  const scale = editor ? editor.width / rect.width : 1;
  return {
    r: Math.floor((ev.clientY - rect.top) * scale),
    c: Math.floor((ev.clientX - rect.left) * scale),
  };
}

function wireCanvas(): void {
  const cv = canvas();
  cv.addEventListener("mousedown", (ev) => {
    if (!editor) return;
    const pos = canvasPos(ev);
    if (tool === "rectangle") {
      dragStart = pos;
    } else {
      const radius = Number(($("brush-radius") as HTMLInputElement).value);
      editor.brush(pos.r, pos.c, radius);
      stroking = true;
      redraw();
    }
  });
  cv.addEventListener("mousemove", (ev) => {
    if (!editor || !stroking || tool !== "brush") return;
    const pos = canvasPos(ev);
    const radius = Number(($("brush-radius") as HTMLInputElement).value);
    editor.brushContinue(pos.r, pos.c, radius);
    redraw();
  });
  const finish = (ev: MouseEvent) => {
    if (!editor) return;
    if (tool === "rectangle" && dragStart) {
      const pos = canvasPos(ev);
      editor.rectangle(dragStart.r, dragStart.c, pos.r + 1, pos.c + 1);
      dragStart = null;
      redraw();
    }
    stroking = false;
  };
  cv.addEventListener("mouseup", finish);
  cv.addEventListener("mouseleave", finish);
}

async function loadFile(file: File): Promise<void> {
  const bitmap = await createImageBitmap(file);
  let side = bitmap.width;
  if (meta && (bitmap.width !== meta.input_side || bitmap.height !== meta.input_side)) {
    const ok = window.confirm(
      `Model expects ${meta.input_side}x${meta.input_side}; resize this ` +
        `${bitmap.width}x${bitmap.height} image on load?`,
    );
    if (!ok) return;
    side = meta.input_side;
  }
  const work = document.createElement("canvas");
  work.width = side;
  work.height = side;
  const ctx = work.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0, side, side);
  baseImage = await createImageBitmap(work);
  baseRgba = new Uint8Array(ctx.getImageData(0, 0, side, side).data.buffer.slice(0));
  editor = new MaskEditor(side, side);
  const cv = canvas();
  const display = Math.max(side, Math.min(512, side * Math.floor(512 / side)));
  cv.width = display;
  cv.height = display;
  attempts.length = 0;
  renderHistory();
  redraw();
  status(`image loaded at ${side}x${side}`);
}

async function originalBlob(): Promise<Blob> {
  const work = document.createElement("canvas");
  work.width = editor!.width;
  work.height = editor!.height;
  work.getContext("2d")!.drawImage(baseImage!, 0, 0);
  return new Promise((resolve, reject) => {
    work.toBlob((b) => (b ? resolve(b) : reject(new Error("canvas export failed"))), "image/png");
  });
}

async function checkValidRegion(resultUrl: string): Promise<void> {
  if (!editor || !baseRgba) return;
  const img = await createImageBitmap(await (await fetch(resultUrl)).blob());
  if (img.width !== editor.width || img.height !== editor.height) return;
  const work = document.createElement("canvas");
  work.width = img.width;
  work.height = img.height;
  const ctx = work.getContext("2d")!;
  ctx.drawImage(img, 0, 0);
  const got = new Uint8Array(ctx.getImageData(0, 0, img.width, img.height).data.buffer.slice(0));
  const bad = diffOutsideMask(baseRgba, got, editor.bits, editor.width, editor.height);
  if (bad > 0) {
    console.warn(`valid-region drift: ${bad} pixels differ outside the mask`);
  }
}

async function submit(freshSeed: boolean): Promise<void> {
  if (!client || !editor || !baseImage) {
    status("connect to a service and load an image first", true);
    return;
  }
  if (busy) return;
  busy = true;
  ($("submit") as HTMLButtonElement).disabled = true;
  ($("resample") as HTMLButtonElement).disabled = true;
  try {
    const seedField = $("seed") as HTMLInputElement;
    let seed: number | null = seedField.value === "" ? null : Number(seedField.value);
    if (freshSeed) {
      seed = Math.floor(Math.random() * 2 ** 31);
      seedField.value = String(seed);
    }
    const result = await client.inpaint(await originalBlob(), editor.toPng(), {
      seed: seed === null ? undefined : seed,
    });
    const blob = new Blob([result.bytes as BlobPart], { type: result.contentType });
    const url = URL.createObjectURL(blob);
    ($("result-img") as HTMLImageElement).src = url;
    renderDamaged();
    ($("original-img") as HTMLImageElement).src = URL.createObjectURL(await originalBlob());
    attempts.push({ seed, url, label: seed === null ? "random" : `seed ${seed}` });
    renderHistory();
    status(
      result.inferenceMs === null ? "done" : `done in ${result.inferenceMs.toFixed(1)} ms`,
    );
    void checkValidRegion(url);
  } catch (err) {
    if (err instanceof ServiceError) {
      status(`service error ${err.status} (${err.code}): ${err.message}`, true);
    } else {
      status(`request failed: ${(err as Error).message}`, true);
    }
  } finally {
    busy = false;
    ($("submit") as HTMLButtonElement).disabled = false;
    ($("resample") as HTMLButtonElement).disabled = false;
  }
}

function renderDamaged(): void {
  if (!baseImage || !editor) return;
  const work = document.createElement("canvas");
  work.width = editor.width;
  work.height = editor.height;
  const ctx = work.getContext("2d")!;
  ctx.drawImage(baseImage, 0, 0);
  const data = ctx.getImageData(0, 0, editor.width, editor.height);
  for (let i = 0; i < editor.bits.length; i++) {
    if (editor.bits[i] === 0) {
      data.data[i * 4] = 128;
      data.data[i * 4 + 1] = 128;
      data.data[i * 4 + 2] = 128;
      data.data[i * 4 + 3] = 255;
    }
  }
  ctx.putImageData(data, 0, 0);
  ($("damaged-img") as HTMLImageElement).src = work.toDataURL("image/png");
}

function renderHistory(): void {
  const host = $("history");
  host.textContent = "";
  for (const attempt of attempts) {
    const fig = document.createElement("figure");
    const img = document.createElement("img");
    img.src = attempt.url;
    img.title = attempt.label;
    img.addEventListener("click", () => {
      ($("result-img") as HTMLImageElement).src = attempt.url;
    });
    const cap = document.createElement("figcaption");
    cap.textContent = attempt.label;
    fig.appendChild(img);
    fig.appendChild(cap);
    host.appendChild(fig);
  }
}

export function start(): void {
  $("connect").addEventListener("click", () => void connect());
  $("file-input").addEventListener("change", (ev) => {
    const input = ev.target as HTMLInputElement;
    if (input.files && input.files[0]) void loadFile(input.files[0]);
  });
  ($("tool-select") as HTMLSelectElement).addEventListener("change", (ev) => {
    tool = (ev.target as HTMLSelectElement).value as Tool;
  });
  $("undo").addEventListener("click", () => {
    if (editor?.undo()) redraw();
  });
  $("redo").addEventListener("click", () => {
    if (editor?.redo()) redraw();
  });
  $("clear").addEventListener("click", () => {
    editor?.clear();
    redraw();
  });
  $("submit").addEventListener("click", () => void submit(false));
  $("resample").addEventListener("click", () => void submit(true));
  wireCanvas();
  void connect();
}

if (typeof document !== "undefined" && document.getElementById("editor-canvas")) {
  start();
}
