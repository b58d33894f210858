// transformers.js is an optional runtime dependency, imported dynamically
declare module "@xenova/transformers";
