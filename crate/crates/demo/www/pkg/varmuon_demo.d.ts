/* tslint:disable */
/* eslint-disable */

/**
 * Newton–Schulz against the exact polar factor on one random matrix.
 */
export class PolarSample {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `‖NS(A) − polar(A)‖_F / √min(m, n)`.
     */
    readonly gap: number;
    /**
     * Singular values of `A / ‖A‖_F`, descending.
     */
    readonly input: Float64Array;
    /**
     * Singular values of `NS(A)`, in the same order as `input`.
     */
    readonly output: Float64Array;
}

/**
 * Training loss after each step (index 0 is the initial loss) of one
 * optimizer on a noisy 16×16 quadratic with a cosine schedule and global
 * clipping at 1.
 */
export function loss_curve(variant: string, gamma: number, lr: number, steps: number, noise: number, condition: number, seed: number): Float64Array;

/**
 * Scalar Newton–Schulz map applied `iters` times, sampled on a log grid of
 * normalized singular values in `[1e-4, 1]`. Returns `[x0, y0, x1, y1, ...]`.
 */
export function ns_transfer(iters: number, cubic: boolean, samples: number): Float64Array;

/**
 * Per-coordinate magnitude of the NSR preconditioner `m / √(m² + γσ²)` with
 * `σ = 1`, for signal-to-noise ratios on a log grid in `[lo, hi]`.
 * Returns `[r0, g0, r1, g1, ...]`. Variance scaling would give `r` and the
 * sign map 1.
 */
export function nsr_gate(gamma: number, lo: number, hi: number, samples: number): Float64Array;

export function polar_sample(rows: number, cols: number, cond: number, iters: number, seed: number): PolarSample;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_polarsample_free: (a: number, b: number) => void;
    readonly loss_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly ns_transfer: (a: number, b: number, c: number) => [number, number];
    readonly nsr_gate: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly polar_sample: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly polarsample_gap: (a: number) => number;
    readonly polarsample_input: (a: number) => [number, number];
    readonly polarsample_output: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
