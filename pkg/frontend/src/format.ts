/** Display formatting only; never feeds anything back into computations. */

export function ratio(value: number | null): string {
  return value === null ? "n/a" : value.toFixed(3);
}

export function amount(value: number): string {
  return value.toLocaleString("en-US", {
    minimumFractionDigits: 2,
    maximumFractionDigits: 2,
  });
}

export function shift(value: number): string {
  const sign = value > 0 ? "+" : "";
  return `${sign}${(100 * value).toFixed(2)}%`;
}

export function delta(value: number): string {
  const sign = value > 0 ? "+" : "";
  return `${sign}${value.toFixed(4)}`;
}
