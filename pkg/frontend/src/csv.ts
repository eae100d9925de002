import { readFileSync } from 'node:fs'

export interface Table {
  columns: string[]
  rows: number[][]
}

export class ParseError extends Error {}

/** Read a strict numeric CSV with a header row (the solver's trace/state format). */
export function readCsv(path: string): Table {
  const text = readFileSync(path, 'utf8')
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0)
  if (lines.length === 0) {
    throw new ParseError(`${path}: file is empty`)
  }
  const columns = lines[0].split(',').map((c) => c.trim())
  const rows: number[][] = []
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(',')
    if (cells.length !== columns.length) {
      throw new ParseError(
        `${path}: row ${i} has ${cells.length} cells, expected ${columns.length}`,
      )
    }
    rows.push(cells.map((c) => Number(c)))
  }
  return { columns, rows }
}

export function column(table: Table, name: string, path = '<csv>'): number[] {
  const idx = table.columns.indexOf(name)
  if (idx < 0) {
    throw new ParseError(
      `${path}: missing column '${name}' (have: ${table.columns.join(', ')})`,
    )
  }
  return table.rows.map((row) => row[idx])
}

export function hasColumn(table: Table, name: string): boolean {
  return table.columns.includes(name)
}
