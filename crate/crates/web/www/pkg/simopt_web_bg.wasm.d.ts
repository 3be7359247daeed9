/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_repsdemo_free: (a: number, b: number) => void;
export const discrepancy_demo: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
export const drawer_rollout: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const repsdemo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const repsdemo_set_target: (a: number, b: number, c: number) => void;
export const repsdemo_state: (a: number) => [number, number];
export const repsdemo_step: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
