export interface Series {
  x: number[]
  y: number[]
  label?: string
}

export interface ChartOptions {
  title: string
  xLabel: string
  yLabel: string
  width?: number
  height?: number
}

const COLORS = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e']

function ticks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo]
  const span = hi - lo
  const step = Math.pow(10, Math.floor(Math.log10(span / count)))
  const candidates = [step, 2 * step, 5 * step, 10 * step]
  const chosen = candidates.find((s) => span / s <= count + 1) ?? 10 * step
  const start = Math.ceil(lo / chosen) * chosen
  const out: number[] = []
  for (let v = start; v <= hi + 1e-12 * span; v += chosen) {
    out.push(Number(v.toPrecision(10)))
  }
  return out.length > 0 ? out : [lo, hi]
}

function fmt(v: number): string {
  if (v === 0) return '0'
  const abs = Math.abs(v)
  if (abs >= 1e4 || abs < 1e-3) return v.toExponential(0)
  return String(Number(v.toPrecision(6)))
}

/** Build a line chart as a standalone SVG document. */
export function lineChart(series: Series[], options: ChartOptions): string {
  const W = options.width ?? 640
  const H = options.height ?? 420
  const m = { left: 64, right: 16, top: 36, bottom: 48 }
  const points = series.flatMap((s) => s.x.map((x, i) => [x, s.y[i]] as const))
  const xs = points.map((p) => p[0])
  const ys = points.map((p) => p[1])
  let xLo = Math.min(...xs)
  let xHi = Math.max(...xs)
  let yLo = Math.min(...ys)
  let yHi = Math.max(...ys)
  if (xHi === xLo) xHi = xLo + 1
  if (yHi === yLo) {
    yLo -= 0.5
    yHi += 0.5
  }
  const sx = (x: number) => m.left + ((x - xLo) / (xHi - xLo)) * (W - m.left - m.right)
  const sy = (y: number) => H - m.bottom - ((y - yLo) / (yHi - yLo)) * (H - m.top - m.bottom)

  const parts: string[] = []
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`,
    `<rect width="${W}" height="${H}" fill="white"/>`,
    `<text x="${W / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">${options.title}</text>`,
  )
  // axes
  parts.push(
    `<line x1="${m.left}" y1="${H - m.bottom}" x2="${W - m.right}" y2="${H - m.bottom}" stroke="black"/>`,
    `<line x1="${m.left}" y1="${m.top}" x2="${m.left}" y2="${H - m.bottom}" stroke="black"/>`,
  )
  for (const t of ticks(xLo, xHi)) {
    const x = sx(t)
    parts.push(
      `<line x1="${x}" y1="${H - m.bottom}" x2="${x}" y2="${H - m.bottom + 4}" stroke="black"/>`,
      `<text x="${x}" y="${H - m.bottom + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">${fmt(t)}</text>`,
    )
  }
  for (const t of ticks(yLo, yHi)) {
    const y = sy(t)
    parts.push(
      `<line x1="${m.left - 4}" y1="${y}" x2="${m.left}" y2="${y}" stroke="black"/>`,
      `<text x="${m.left - 8}" y="${y + 4}" text-anchor="end" font-family="sans-serif" font-size="11">${fmt(t)}</text>`,
      `<line x1="${m.left}" y1="${y}" x2="${W - m.right}" y2="${y}" stroke="#dddddd"/>`,
    )
  }
  parts.push(
    `<text x="${(m.left + W - m.right) / 2}" y="${H - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">${options.xLabel}</text>`,
    `<text x="16" y="${(m.top + H - m.bottom) / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 ${(m.top + H - m.bottom) / 2})">${options.yLabel}</text>`,
  )
  series.forEach((s, k) => {
    const path = s.x
      .map((x, i) => `${i === 0 ? 'M' : 'L'}${sx(x).toFixed(2)},${sy(s.y[i]).toFixed(2)}`)
      .join('')
    parts.push(`<path d="${path}" fill="none" stroke="${COLORS[k % COLORS.length]}" stroke-width="1.5"/>`)
    if (s.label) {
      parts.push(
        `<text x="${W - m.right - 8}" y="${m.top + 14 + 16 * k}" text-anchor="end" font-family="sans-serif" font-size="11" fill="${COLORS[k % COLORS.length]}">${s.label}</text>`,
      )
    }
  })
  parts.push('</svg>')
  return parts.join('\n')
}
