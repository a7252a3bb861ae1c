/** Minimal SVG line charts; no chart library so every pixel is ours. */

export interface Series {
  label: string;
  values: number[];
  color: string;
}

const COLORS = ['#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd', '#8c564b', '#e377c2'];

export function color(i: number): string {
  return COLORS[i % COLORS.length]!;
}

function path(values: number[], xScale: (i: number) => number, yScale: (v: number) => number): string {
  return values
    .map((v, i) => `${i === 0 ? 'M' : 'L'}${xScale(i).toFixed(2)},${yScale(v).toFixed(2)}`)
    .join(' ');
}

export function lineChart(series: Series[], width = 640, height = 280): SVGSVGElement {
  const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
  svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
  svg.setAttribute('width', String(width));
  svg.setAttribute('height', String(height));
  svg.setAttribute('role', 'img');
  const margin = { top: 10, right: 10, bottom: 22, left: 58 };
  const innerW = width - margin.left - margin.right;
  const innerH = height - margin.top - margin.bottom;

  const all = series.flatMap((s) => s.values);
  const maxLen = Math.max(1, ...series.map((s) => s.values.length));
  const lo = Math.min(0, ...all);
  const hi = Math.max(1e-9, ...all);
  const xScale = (i: number) => margin.left + (maxLen === 1 ? 0 : (i / (maxLen - 1)) * innerW);
  const yScale = (v: number) => margin.top + innerH - ((v - lo) / (hi - lo)) * innerH;

  const axis = document.createElementNS(svg.namespaceURI, 'path') as SVGPathElement;
  axis.setAttribute('d', `M${margin.left},${margin.top} V${margin.top + innerH} H${width - margin.right}`);
  axis.setAttribute('stroke', '#888');
  axis.setAttribute('fill', 'none');
  svg.appendChild(axis);

  for (const [text, y] of [[hi, margin.top + 4], [lo, margin.top + innerH]] as [number, number][]) {
    const label = document.createElementNS(svg.namespaceURI, 'text') as SVGTextElement;
    label.setAttribute('x', '2');
    label.setAttribute('y', String(y));
    label.setAttribute('font-size', '11');
    label.textContent = text.toLocaleString(undefined, { maximumFractionDigits: 1 });
    svg.appendChild(label);
  }

  for (const s of series) {
    if (s.values.length === 0) continue;
    if (s.values.length === 1) {
      const dot = document.createElementNS(svg.namespaceURI, 'circle') as SVGCircleElement;
      dot.setAttribute('cx', String(xScale(0)));
      dot.setAttribute('cy', String(yScale(s.values[0]!)));
      dot.setAttribute('r', '3');
      dot.setAttribute('fill', s.color);
      dot.setAttribute('data-series', s.label);
      svg.appendChild(dot);
      continue;
    }
    const line = document.createElementNS(svg.namespaceURI, 'path') as SVGPathElement;
    line.setAttribute('d', path(s.values, xScale, yScale));
    line.setAttribute('stroke', s.color);
    line.setAttribute('fill', 'none');
    line.setAttribute('stroke-width', '1.5');
    line.setAttribute('data-series', s.label);
    svg.appendChild(line);
  }
  return svg;
}

/** Tiny inline sparkline used on job cards. */
export function sparkline(values: number[], width = 120, height = 28): SVGSVGElement {
  const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
  svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
  svg.setAttribute('width', String(width));
  svg.setAttribute('height', String(height));
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const xScale = (i: number) => (values.length === 1 ? 0 : (i / (values.length - 1)) * width);
  const yScale = (v: number) => height - 2 - ((v - lo) / span) * (height - 4);
  for (let i = 0; i < values.length; i++) {
    const dot = document.createElementNS(svg.namespaceURI, 'circle') as SVGCircleElement;
    dot.setAttribute('cx', String(xScale(i)));
    dot.setAttribute('cy', String(yScale(values[i]!)));
    dot.setAttribute('r', '2');
    dot.setAttribute('fill', '#1f77b4');
    dot.setAttribute('data-point', String(values[i]));
    svg.appendChild(dot);
  }
  if (values.length > 1) {
    const line = document.createElementNS(svg.namespaceURI, 'path') as SVGPathElement;
    line.setAttribute('d', path(values, xScale, yScale));
    line.setAttribute('stroke', '#1f77b4');
    line.setAttribute('fill', 'none');
    svg.appendChild(line);
  }
  return svg;
}
