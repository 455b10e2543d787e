import {
  Tensor,
  Rng,
  addRow,
  add,
  concatCols,
  gatherRows,
  matmul,
  mulElem,
  randn,
  sigmoidT,
  sliceCols,
  tanhT,
} from "./tensor.js";

export interface Module {
  params(): Tensor[];
}

function heInit(rows: number, cols: number, rng: Rng): Tensor {
  const t = randn(rows, cols, rng, Math.sqrt(2 / rows));
  t.requiresGrad = true;
  return t;
}

export class Dense implements Module {
  w: Tensor;
  b: Tensor;

  constructor(inDim: number, outDim: number, rng: Rng) {
    this.w = heInit(inDim, outDim, rng);
    this.b = new Tensor(1, outDim);
    this.b.requiresGrad = true;
  }

  forward(x: Tensor): Tensor {
    return addRow(matmul(x, this.w), this.b);
  }

  params(): Tensor[] {
    return [this.w, this.b];
  }
}

export class Embedding implements Module {
  table: Tensor;

  constructor(vocab: number, dim: number, rng: Rng) {
    this.table = randn(vocab, dim, rng, 0.1);
    this.table.requiresGrad = true;
  }

  forward(ids: Int32Array): Tensor {
    return gatherRows(this.table, ids);
  }

  params(): Tensor[] {
    return [this.table];
  }
}

export interface LstmState {
  h: Tensor;
  c: Tensor;
}

/** One LSTM layer; gate weights packed [i | f | g | o]. */
export class LstmCell implements Module {
  wx: Tensor;
  wh: Tensor;
  b: Tensor;
  readonly hidden: number;

  constructor(inDim: number, hidden: number, rng: Rng) {
    this.hidden = hidden;
    this.wx = heInit(inDim, 4 * hidden, rng);
    this.wh = heInit(hidden, 4 * hidden, rng);
    this.b = new Tensor(1, 4 * hidden);
    // forget-gate bias starts at 1 so early training retains state
    for (let j = this.hidden; j < 2 * this.hidden; j++) this.b.data[j] = 1;
    this.b.requiresGrad = true;
  }

  step(x: Tensor, state: LstmState): LstmState {
    const H = this.hidden;
    const gates = addRow(add(matmul(x, this.wx), matmul(state.h, this.wh)), this.b);
    const i = sigmoidT(sliceCols(gates, 0, H));
    const f = sigmoidT(sliceCols(gates, H, 2 * H));
    const g = tanhT(sliceCols(gates, 2 * H, 3 * H));
    const o = sigmoidT(sliceCols(gates, 3 * H, 4 * H));
    const c = add(mulElem(f, state.c), mulElem(i, g));
    const h = mulElem(o, tanhT(c));
    return { h, c };
  }

  params(): Tensor[] {
    return [this.wx, this.wh, this.b];
  }
}

/** Stacked LSTM; layer k feeds layer k+1 at each timestep. */
export class LstmStack implements Module {
  cells: LstmCell[];

  constructor(inDim: number, hidden: number, layers: number, rng: Rng) {
    this.cells = [];
    for (let k = 0; k < layers; k++) {
      this.cells.push(new LstmCell(k === 0 ? inDim : hidden, hidden, rng));
    }
  }

  step(x: Tensor, states: LstmState[]): { out: Tensor; states: LstmState[] } {
    const next: LstmState[] = [];
    let input = x;
    for (let k = 0; k < this.cells.length; k++) {
      const s = this.cells[k].step(input, states[k]);
      next.push(s);
      input = s.h;
    }
    return { out: input, states: next };
  }

  params(): Tensor[] {
    return this.cells.flatMap((c) => c.params());
  }
}

export { concatCols };
