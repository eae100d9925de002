import { mkdtempSync, mkdirSync, readdirSync, readFileSync, writeFileSync, existsSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'
import { beforeAll, describe, expect, it } from 'vitest'

import { column, readCsv, ParseError } from '../src/csv.js'
import { encodePng } from '../src/png.js'
import { viridis } from '../src/colormap.js'
import {
  renderConvergenceCurve,
  renderProfileHeatmap,
  renderSaddleDistance,
} from '../src/figures.js'
import { applicableKinds, main } from '../src/cli.js'

const TRACE_HEADER = 'iter,energy,grad_norm,lambda,residual,tau,min_u,max_u,l2_error,a0_diff'

/** Build a run directory that mirrors the solver's artifact schema. */
function makeRunDir(options: { saddleColumn?: boolean; emptyTrace?: boolean } = {}): string {
  const dir = mkdtempSync(join(tmpdir(), 'gpe-run-'))
  const header = options.saddleColumn ? `${TRACE_HEADER},dist_saddle` : TRACE_HEADER
  const rows: string[] = [header]
  if (!options.emptyTrace) {
    for (let n = 0; n < 25; n++) {
      const err = Math.pow(10, -0.4 * n - 1)
      const grad = err * 0.5
      const base = `${n},${5.3 + err * err},${grad},5.62,${grad * 2},1.0,0.001,1.01,${err},${n === 24 ? 'nan' : grad}`
      rows.push(options.saddleColumn ? `${base},${Math.pow(10, -Math.abs(n - 12) * 0.3)}` : base)
    }
  }
  writeFileSync(join(dir, 'trace.csv'), rows.join('\n') + '\n')

  const nx = 20
  const ny = 20
  const stateRows = ['index,x,y,value']
  for (let ix = 0; ix < nx; ix++) {
    for (let iy = 0; iy < ny; iy++) {
      const x = -1 + (2 * (ix + 1)) / (nx + 1)
      const y = -1 + (2 * (iy + 1)) / (ny + 1)
      const value = Math.exp(-4 * (x * x + y * y))
      stateRows.push(`${ix * ny + iy},${x},${y},${value}`)
    }
  }
  writeFileSync(join(dir, 'state.csv'), stateRows.join('\n') + '\n')
  writeFileSync(
    join(dir, 'scenario.json'),
    JSON.stringify({ name: 'gp-disorder', tag: 'fixture' }),
  )
  return dir
}

function pngSize(buf: Buffer): { width: number; height: number } {
  return { width: buf.readUInt32BE(16), height: buf.readUInt32BE(20) }
}

describe('csv', () => {
  it('parses the trace schema including nan cells', () => {
    const dir = makeRunDir()
    const table = readCsv(join(dir, 'trace.csv'))
    expect(table.columns).toContain('l2_error')
    const a0 = column(table, 'a0_diff')
    expect(Number.isNaN(a0[a0.length - 1])).toBe(true)
  })

  it('errors on a missing column', () => {
    const dir = makeRunDir()
    const table = readCsv(join(dir, 'trace.csv'))
    expect(() => column(table, 'bogus', 'trace.csv')).toThrow(/missing column 'bogus'/)
  })

  it('errors on ragged rows', () => {
    const dir = mkdtempSync(join(tmpdir(), 'gpe-bad-'))
    writeFileSync(join(dir, 'bad.csv'), 'a,b\n1,2\n3\n')
    expect(() => readCsv(join(dir, 'bad.csv'))).toThrow(ParseError)
  })
})

describe('png encoder', () => {
  it('writes a decodable header and signature', () => {
    const buf = encodePng(3, 2, new Uint8Array(3 * 2 * 3).fill(128))
    expect([...buf.subarray(0, 8)]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a])
    expect(pngSize(buf)).toEqual({ width: 3, height: 2 })
    expect(buf.subarray(buf.length - 8, buf.length - 4).toString('ascii')).toBe('IEND')
  })

  it('rejects a mismatched buffer', () => {
    expect(() => encodePng(4, 4, new Uint8Array(5))).toThrow()
  })
})

describe('colormap', () => {
  it('covers the range and clamps', () => {
    expect(viridis(0)).toEqual([68, 1, 84])
    expect(viridis(1)).toEqual([253, 231, 37])
    expect(viridis(-5)).toEqual(viridis(0))
    expect(viridis(7)).toEqual(viridis(1))
  })
})

describe('figures', () => {
  let runDir: string
  beforeAll(() => {
    runDir = makeRunDir()
  })

  it('renders a convergence curve SVG', () => {
    const out = join(mkdtempSync(join(tmpdir(), 'figs-')), 'curve.svg')
    renderConvergenceCurve({ kind: 'convergence-curve', input: join(runDir, 'trace.csv'), output: out })
    const svg = readFileSync(out, 'utf8')
    expect(svg).toContain('<svg')
    expect(svg).toContain('log10 L2 error')
    expect(svg).toMatch(/<path d="M[\d.,L-]+"/)
  })

  it('renders a heatmap PNG with upscaled grid dimensions', () => {
    const out = join(mkdtempSync(join(tmpdir(), 'figs-')), 'state.png')
    renderProfileHeatmap({ kind: 'profile-heatmap', input: join(runDir, 'state.csv'), output: out })
    const buf = readFileSync(out)
    const { width, height } = pngSize(buf)
    expect(width).toBe(height)
    expect(width % 20).toBe(0)
    expect(width).toBeGreaterThanOrEqual(320)
  })

  it('renders the saddle-distance curve when the column exists', () => {
    const saddleDir = makeRunDir({ saddleColumn: true })
    const out = join(mkdtempSync(join(tmpdir(), 'figs-')), 'saddle.svg')
    renderSaddleDistance({ kind: 'saddle-distance', input: join(saddleDir, 'trace.csv'), output: out })
    expect(readFileSync(out, 'utf8')).toContain('log10 distance')
  })

  it('empty trace raises and writes nothing', () => {
    const emptyDir = makeRunDir({ emptyTrace: true })
    const out = join(mkdtempSync(join(tmpdir(), 'figs-')), 'none.svg')
    expect(() =>
      renderConvergenceCurve({ kind: 'convergence-curve', input: join(emptyDir, 'trace.csv'), output: out }),
    ).toThrow(/no positive finite/)
    expect(existsSync(out)).toBe(false)
  })

  it('rejects a state file that is not a full grid', () => {
    const dir = mkdtempSync(join(tmpdir(), 'gpe-ragged-'))
    writeFileSync(join(dir, 'state.csv'), 'index,x,y,value\n0,0,0,1\n1,0,1,2\n2,1,0,3\n')
    const out = join(dir, 'x.png')
    expect(() =>
      renderProfileHeatmap({ kind: 'profile-heatmap', input: join(dir, 'state.csv'), output: out }),
    ).toThrow(/grid/)
  })
})

describe('cli', () => {
  it('detects applicable kinds', () => {
    expect(applicableKinds(makeRunDir())).toEqual(['convergence-curve', 'profile-heatmap'])
    expect(applicableKinds(makeRunDir({ saddleColumn: true }))).toEqual([
      'convergence-curve',
      'saddle-distance',
      'profile-heatmap',
    ])
  })

  it('renders a full run directory without touching it', () => {
    const runDir = makeRunDir()
    const before = readdirSync(runDir).sort()
    const out = mkdtempSync(join(tmpdir(), 'figs-'))
    const code = main([runDir, '--out', out])
    expect(code).toBe(0)
    expect(readdirSync(runDir).sort()).toEqual(before)
    const written = readdirSync(out).sort()
    expect(written.some((f) => f.endsWith('convergence-curve.svg'))).toBe(true)
    expect(written.some((f) => f.endsWith('profile-heatmap.png'))).toBe(true)
  })

  it('returns nonzero for a missing directory', () => {
    expect(main(['/nonexistent/run'])).toBe(1)
  })

  it('returns nonzero when a render fails', () => {
    const emptyDir = makeRunDir({ emptyTrace: true })
    const out = mkdtempSync(join(tmpdir(), 'figs-'))
    expect(main([emptyDir, '--kind', 'convergence-curve', '--out', out])).toBe(1)
    expect(readdirSync(out)).toEqual([])
  })

  it('renders a real run directory when one is provided', () => {
    const real = process.env.GPE_RUN_DIR
    if (!real) return // exercised in integration; unit fixtures cover the schema
    const out = mkdtempSync(join(tmpdir(), 'figs-'))
    expect(main([real, '--out', out])).toBe(0)
    expect(readdirSync(out).length).toBeGreaterThan(0)
  })
})
