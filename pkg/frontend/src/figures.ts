import { mkdirSync, writeFileSync } from 'node:fs'
import { dirname } from 'node:path'

import { column, hasColumn, ParseError, readCsv } from './csv.js'
import { viridis } from './colormap.js'
import { encodePng } from './png.js'
import { lineChart } from './svg.js'

export type FigureKind = 'convergence-curve' | 'profile-heatmap' | 'saddle-distance'

export interface FigureSpec {
  kind: FigureKind
  input: string
  output: string
  title?: string
}

function writeOut(path: string, data: string | Buffer): void {
  mkdirSync(dirname(path), { recursive: true })
  writeFileSync(path, data)
}

function finitePairs(x: number[], y: number[]): [number[], number[]] {
  const xs: number[] = []
  const ys: number[] = []
  for (let i = 0; i < x.length; i++) {
    if (Number.isFinite(x[i]) && Number.isFinite(y[i]) && y[i] > 0) {
      xs.push(x[i])
      ys.push(Math.log10(y[i]))
    }
  }
  return [xs, ys]
}

/** Log-scale error-vs-iteration curve from a run trace. */
export function renderConvergenceCurve(spec: FigureSpec): void {
  const table = readCsv(spec.input)
  const iters = column(table, 'iter', spec.input)
  const errName = hasColumn(table, 'l2_error') ? 'l2_error' : 'grad_norm'
  const errs = column(table, errName, spec.input)
  const [xs, ys] = finitePairs(iters, errs)
  if (xs.length === 0) {
    throw new ParseError(`${spec.input}: no positive finite ${errName} values to plot`)
  }
  const svg = lineChart([{ x: xs, y: ys }], {
    title: spec.title ?? 'Convergence',
    xLabel: 'iteration',
    yLabel: `log10 ${errName === 'l2_error' ? 'L2 error' : 'gradient norm'}`,
  })
  writeOut(spec.output, svg)
}

/** Distance-to-saddle curve (log scale) from a perturbed-start trace. */
export function renderSaddleDistance(spec: FigureSpec): void {
  const table = readCsv(spec.input)
  const iters = column(table, 'iter', spec.input)
  const dist = column(table, 'dist_saddle', spec.input)
  const [xs, ys] = finitePairs(iters, dist)
  if (xs.length === 0) {
    throw new ParseError(`${spec.input}: no positive finite dist_saddle values to plot`)
  }
  const svg = lineChart([{ x: xs, y: ys }], {
    title: spec.title ?? 'Distance to saddle state',
    xLabel: 'iteration',
    yLabel: 'log10 distance',
  })
  writeOut(spec.output, svg)
}

/** Field heatmap from a state dump (index,x,y,value). */
export function renderProfileHeatmap(spec: FigureSpec, minPixels = 320): void {
  const table = readCsv(spec.input)
  const xs = column(table, 'x', spec.input)
  const ys = column(table, 'y', spec.input)
  const values = column(table, 'value', spec.input)
  if (values.length === 0) {
    throw new ParseError(`${spec.input}: state file has no rows`)
  }
  const uniqX = [...new Set(xs)].sort((a, b) => a - b)
  const uniqY = [...new Set(ys)].sort((a, b) => a - b)
  const nx = uniqX.length
  const ny = uniqY.length
  if (nx * ny !== values.length) {
    throw new ParseError(
      `${spec.input}: ${values.length} nodes do not form a ${nx}x${ny} grid`,
    )
  }
  let lo = Infinity
  let hi = -Infinity
  for (const v of values) {
    if (!Number.isFinite(v)) throw new ParseError(`${spec.input}: non-finite value`)
    lo = Math.min(lo, v)
    hi = Math.max(hi, v)
  }
  const span = hi > lo ? hi - lo : 1
  // rows are written x-major: index = ix * ny + iy
  const scale = Math.max(1, Math.ceil(minPixels / Math.max(nx, ny)))
  const W = nx * scale
  const H = ny * scale
  const rgb = new Uint8Array(W * H * 3)
  for (let ix = 0; ix < nx; ix++) {
    for (let iy = 0; iy < ny; iy++) {
      const [r, g, b] = viridis((values[ix * ny + iy] - lo) / span)
      for (let py = 0; py < scale; py++) {
        // image rows run top-down; grid y runs bottom-up
        const row = (ny - 1 - iy) * scale + py
        for (let px = 0; px < scale; px++) {
          const o = (row * W + ix * scale + px) * 3
          rgb[o] = r
          rgb[o + 1] = g
          rgb[o + 2] = b
        }
      }
    }
  }
  writeOut(spec.output, encodePng(W, H, rgb))
}

export function render(spec: FigureSpec): void {
  switch (spec.kind) {
    case 'convergence-curve':
      return renderConvergenceCurve(spec)
    case 'profile-heatmap':
      return renderProfileHeatmap(spec)
    case 'saddle-distance':
      return renderSaddleDistance(spec)
    default:
      throw new ParseError(`unknown figure kind '${(spec as FigureSpec).kind}'`)
  }
}
