// Formatting for the debug side panel. The payload comes straight off the
// wire; anything that doesn't match the expected shape falls back to raw
// JSON instead of breaking the page.

import { DebugInfo } from "./api.js";

function isDebugInfo(value: unknown): value is DebugInfo {
  if (typeof value !== "object" || value === null) return false;
  const v = value as Record<string, unknown>;
  return (
    typeof v.intent === "string" &&
    Array.isArray(v.ranking) &&
    v.ranking.every(
      (r) => Array.isArray(r) && r.length === 2 &&
        typeof r[0] === "string" && typeof r[1] === "number",
    ) &&
    Array.isArray(v.entities) &&
    Array.isArray(v.actions)
  );
}

export function formatDebug(value: unknown): string[] {
  if (!isDebugInfo(value)) {
    return [JSON.stringify(value, null, 2)];
  }
  const lines: string[] = [`intent: ${value.intent}`];
  const ranking = [...value.ranking].sort((a, b) => b[1] - a[1]);
  for (const [name, conf] of ranking) {
    lines.push(`  ${name}  ${conf.toFixed(4)}`);
  }
  if (value.entities.length) {
    lines.push("entities:");
    for (const ent of value.entities) {
      const e = ent as { entity?: string; value?: string; surface?: string };
      lines.push(`  ${e.entity ?? "?"} = ${e.value ?? "?"} ("${e.surface ?? ""}")`);
    }
  } else {
    lines.push("entities: none");
  }
  lines.push(`actions: ${value.actions.join(" -> ") || "none"}`);
  return lines;
}
