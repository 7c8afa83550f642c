// Display formatting; percentages carry one decimal, matching the reports.

export function percent1(fraction: number): string {
  return `${(fraction * 100).toFixed(1)}%`;
}

export function weightsLabel(weights: number[]): string {
  return `(${weights.map(percent1).join(', ')})`;
}

export function num(value: number, digits = 3): string {
  return value.toFixed(digits);
}
