/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_polarsample_free: (a: number, b: number) => void;
export const loss_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const ns_transfer: (a: number, b: number, c: number) => [number, number];
export const nsr_gate: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const polar_sample: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const polarsample_gap: (a: number) => number;
export const polarsample_input: (a: number) => [number, number];
export const polarsample_output: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
