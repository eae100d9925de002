#!/usr/bin/env node
// render_figures <run-dir> [--kind convergence-curve|profile-heatmap|saddle-distance]...
//                [--out <dir>]
// Reads the run directory's trace.csv / state.csv and writes figures to the
// output directory (default ./figures/<run-name>); the run directory itself
// is never written to.
import { existsSync, readFileSync } from 'node:fs'
import { basename, join, resolve } from 'node:path'

import { FigureKind, FigureSpec, render } from './figures.js'
import { hasColumn, readCsv } from './csv.js'

const KINDS: FigureKind[] = ['convergence-curve', 'profile-heatmap', 'saddle-distance']

function usage(): never {
  console.error(
    'usage: render_figures <run-dir> [--kind <kind>]... [--out <dir>]\n' +
      `       kinds: ${KINDS.join(', ')}`,
  )
  process.exit(2)
}

export function applicableKinds(runDir: string): FigureKind[] {
  const kinds: FigureKind[] = []
  const trace = join(runDir, 'trace.csv')
  if (existsSync(trace)) {
    kinds.push('convergence-curve')
    if (hasColumn(readCsv(trace), 'dist_saddle')) kinds.push('saddle-distance')
  }
  if (existsSync(join(runDir, 'state.csv'))) kinds.push('profile-heatmap')
  return kinds
}

export function figureSpecs(runDir: string, kinds: FigureKind[], outDir: string): FigureSpec[] {
  const name = basename(resolve(runDir))
  let title = name
  const scenarioPath = join(runDir, 'scenario.json')
  if (existsSync(scenarioPath)) {
    try {
      const scenario = JSON.parse(readFileSync(scenarioPath, 'utf8'))
      title = `${scenario.name}${scenario.tag ? ` (${scenario.tag})` : ''}`
    } catch {
      // fall back to the directory name
    }
  }
  return kinds.map((kind) => {
    const input = join(runDir, kind === 'profile-heatmap' ? 'state.csv' : 'trace.csv')
    const ext = kind === 'profile-heatmap' ? 'png' : 'svg'
    return { kind, input, output: join(outDir, `${name}-${kind}.${ext}`), title }
  })
}

export function main(argv: string[]): number {
  const args = [...argv]
  let runDir: string | undefined
  const kinds: FigureKind[] = []
  let outDir: string | undefined
  while (args.length > 0) {
    const arg = args.shift()!
    if (arg === '--kind') {
      const value = args.shift()
      if (!value || !KINDS.includes(value as FigureKind)) usage()
      kinds.push(value as FigureKind)
    } else if (arg === '--out') {
      const value = args.shift()
      if (!value) usage()
      outDir = value
    } else if (arg.startsWith('-')) {
      usage()
    } else if (runDir === undefined) {
      runDir = arg
    } else {
      usage()
    }
  }
  if (!runDir) usage()
  if (!existsSync(runDir)) {
    console.error(`error: run directory not found: ${runDir}`)
    return 1
  }
  const selected = kinds.length > 0 ? kinds : applicableKinds(runDir)
  if (selected.length === 0) {
    console.error(`error: no trace.csv or state.csv in ${runDir}`)
    return 1
  }
  const out = outDir ?? join('figures', basename(resolve(runDir)))
  let failures = 0
  for (const spec of figureSpecs(runDir, selected, out)) {
    try {
      render(spec)
      console.log(`wrote ${spec.output}`)
    } catch (err) {
      failures += 1
      console.error(`error rendering ${spec.kind}: ${(err as Error).message}`)
    }
  }
  return failures === 0 ? 0 : 1
}

const isDirectCall =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(basename(process.argv[1]))
if (isDirectCall) {
  process.exit(main(process.argv.slice(2)))
}
