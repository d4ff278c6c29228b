/** Tiny DOM helpers; numeric spans always carry the exact payload value. */

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

/**
 * A numeric display cell: the visible text is a formatted rendering, while
 * `data-value` holds the payload number verbatim so that contract tests
 * (and audits) can confirm no client-side arithmetic happened.
 */
export function numberCell(
  value: number | null,
  formatted: string,
  attrs: Record<string, string> = {},
): HTMLSpanElement {
  return el("span", {
    ...attrs,
    class: `value ${attrs.class ?? ""}`.trim(),
    "data-value": value === null ? "null" : String(value),
  }, [formatted]);
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}
