/** Tiny string-level probes for the rendered HTML. */

export function gaugeValue(html: string, name: string): string {
  const match = html.match(
    new RegExp(`class="gauge gauge-${name}" data-value="([^"]+)"`),
  );
  if (!match) throw new Error(`no ${name} gauge in render`);
  return match[1];
}

export function unescapeHtml(text: string): string {
  return text
    .replace(/&quot;/g, '"')
    .replace(/&gt;/g, ">")
    .replace(/&lt;/g, "<")
    .replace(/&amp;/g, "&");
}

/** All body rows of the first table, as arrays of unescaped cell text. */
export function tableRows(html: string): string[][] {
  return [...html.matchAll(/<tr>([\s\S]*?)<\/tr>/g)]
    .map((row) =>
      [...row[1].matchAll(/<td[^>]*>([\s\S]*?)<\/td>/g)].map((cell) =>
        unescapeHtml(cell[1].replace(/\s+/g, " ").trim()),
      ),
    )
    .filter((cells) => cells.length > 0);
}

/** record ids of the probability header, in rendered order. */
export function headerOrder(html: string): number[] {
  const head = html.match(/<thead>([\s\S]*?)<\/thead>/);
  if (!head) throw new Error("no header in render");
  return [...head[1].matchAll(/data-record="(\d+)"/g)].map((m) =>
    Number(m[1]),
  );
}

export function attrOf(
  html: string,
  anchor: string,
  attribute: string,
): string {
  const index = html.indexOf(anchor);
  if (index < 0) throw new Error(`anchor ${anchor} not found`);
  const tail = html.slice(index);
  const match = tail.match(new RegExp(`${attribute}="([^"]*)"`));
  if (!match) throw new Error(`attribute ${attribute} not found near anchor`);
  return match[1];
}
