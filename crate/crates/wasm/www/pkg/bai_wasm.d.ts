/* tslint:disable */
/* eslint-disable */

/**
 * Tunes the static rule to `(mu1, mu2)` and builds a certified instance,
 * with tilting mean `a`, on which that tuned rule has a worse rate than
 * uniform sampling.
 */
export function beating_witness(mu1: number, mu2: number, a: number): string;

/**
 * Exact log error probabilities against the budget for the static rule at
 * `x`, the rate-optimal static rule and uniform sampling.
 */
export function error_curves(mu1: number, mu2: number, x: number, t_max: number, t_step: number): string;

/**
 * Large-deviation rate `g(x)` and tilting mean over an interior grid of
 * `points` allocations, plus the optimal allocation.
 */
export function rate_curve(mu1: number, mu2: number, points: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly beating_witness: (a: number, b: number, c: number) => [number, number];
    readonly error_curves: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly rate_curve: (a: number, b: number, c: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
