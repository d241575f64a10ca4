/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const amplified_square: (a: number, b: number) => [number, number];
export const enhancement_curve: (a: number, b: number) => [number, number];
export const spectator_curve: (a: number, b: number, c: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
