/* tslint:disable */
/* eslint-disable */

/**
 * Solves a random `n×n` instance and returns, per iteration,
 * `[objective, gap, log10 decrease]` flattened. The decrease is `NaN` where
 * the objective did not strictly drop.
 */
export function convergence_trace(n: number, seed: bigint, scale: number, beta: number, eta: number, theta: number, max_iters: number): Float64Array;

/**
 * Path of one spectral coordinate from `lambda0`: pairs `[λ^k, case]` for
 * `k = 1..`, flattened, where `case` is the regime number of the step taken
 * from `λ^k`.
 */
export function coordinate_path(lambda0: number, sigma: number, beta: number, eta: number, theta: number, steps: number): Float64Array;

/**
 * Converged spectral energies for every `η` in `etas`, flattened row-major
 * (`etas.len()` rows of `sigmas.len()` values). Sigmas are sorted
 * descending first; iteration starts from the leading three principal
 * portfolios.
 */
export function energy_profile(sigmas: Float64Array, etas: Float64Array, beta: number, theta: number, max_iters: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly convergence_trace: (a: number, b: bigint, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly coordinate_path: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly energy_profile: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
