/* tslint:disable */
/* eslint-disable */

/**
 * A 2-D Gaussian refit against the cost `|x - target|²` one pass at a time.
 */
export class RepsDemo {
    free(): void;
    [Symbol.dispose](): void;
    constructor(target_x: number, target_y: number, std: number, seed: bigint);
    set_target(x: number, y: number): void;
    /**
     * Current mean and covariance.
     */
    state(): string;
    /**
     * Draws `n` samples, scores them and applies one pass with KL bound `epsilon`.
     */
    step(n: number, epsilon: number): string;
}

/**
 * Two noisy sine tracks offset in phase, their smoothed versions and the
 * discrepancy between them.
 */
export function discrepancy_demo(phase: number, noise: number, smooth_std: number, w_l1: number, w_l2: number, seed: bigint): string;

/**
 * Drawer episode at the given cabinet offset. With an empty `policy_json`
 * a scripted controller reaches for the handle and pulls; otherwise the
 * deterministic action of the pasted policy file is used.
 */
export function drawer_rollout(cabinet_x: number, gain: number, policy_json: string, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_repsdemo_free: (a: number, b: number) => void;
    readonly discrepancy_demo: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly drawer_rollout: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly repsdemo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly repsdemo_set_target: (a: number, b: number, c: number) => void;
    readonly repsdemo_state: (a: number) => [number, number];
    readonly repsdemo_step: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
