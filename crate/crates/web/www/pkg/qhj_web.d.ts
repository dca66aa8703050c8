/* tslint:disable */
/* eslint-disable */

/**
 * JSON with `x`, `V`, `phi`, `trig`, `Wp`, `W`, `energy`, `deviation`.
 */
export function explore_microstate(potential: string, level: number, a: number, b: number, c: number): string;

/**
 * JSON with `outcome` and, when unique, `a`, `b`, `c`, `direction`, `x`, `Wp`.
 */
export function invert_initial_value(psi_re: number, psi_im: number, dpsi_re: number, dpsi_im: number, energy: number): string;

/**
 * JSON with `x`, `t1`, `t2`, `max_difference`.
 */
export function well_trajectories(a1: number, b1: number, c1: number, a2: number, b2: number, c2: number, energy: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly explore_microstate: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly invert_initial_value: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly well_trajectories: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
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
