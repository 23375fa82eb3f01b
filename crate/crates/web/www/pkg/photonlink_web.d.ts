/* tslint:disable */
/* eslint-disable */

export function coincidenceHistogram(preset_name: string, phase_averaged: boolean, phase_rad: number, duration_s: number, seed: number): string;

export function exploreTransfer(weight1: number, m1: number, m2: number, mismatch_rad: number): string;

export function fringeSweep(preset_name: string, visibility: number, dark_scale: number, points: number, duration_per_point_s: number, seed: number): string;

/**
 * Coupling magnitude giving full transfer, for the page's slider default.
 */
export function fullTransferCoupling(): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly coincidenceHistogram: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly exploreTransfer: (a: number, b: number, c: number, d: number) => [number, number];
    readonly fringeSweep: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly fullTransferCoupling: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
