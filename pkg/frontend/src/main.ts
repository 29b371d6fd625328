/**
 * Figure CLI. Reads the exported set/history/bounds files and writes SVG.
 *
 *   node dist/main.js sets --algebra small=sets_algebra_small.csv \
 *       --group small=sets_group_small.csv --block position --pair xy \
 *       --out sets_position_xy.svg
 *   node dist/main.js histories --case small=history_small.csv:bounds_small.json \
 *       --out histories.svg
 */

import { writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import type { Block, Pair } from "./data.js";
import { type CaseFile, type HistoryCase, plotHistories, plotSets } from "./figures.js";

const USAGE = `usage:
  sets      --algebra LABEL=PATH [--algebra ...] --group LABEL=PATH [--group ...]
            --block {position|velocity|rotation} --pair {xy|xz|yz} --out FILE.svg
  histories --case LABEL=HISTORY.csv:BOUNDS.json [--case ...] --out FILE.svg`;

class ArgError extends Error {}

function parseLabelled(value: string, flag: string): { label: string; rest: string } {
  const eq = value.indexOf("=");
  if (eq <= 0) {
    throw new ArgError(`${flag} expects LABEL=PATH, got "${value}"`);
  }
  return { label: value.slice(0, eq), rest: value.slice(eq + 1) };
}

function takeValue(argv: string[], i: number, flag: string): string {
  const v = argv[i + 1];
  if (v === undefined) {
    throw new ArgError(`${flag} needs a value`);
  }
  return v;
}

function runSets(argv: string[]): void {
  const algebra: CaseFile[] = [];
  const group: CaseFile[] = [];
  let block = "";
  let pair = "";
  let out = "";
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i] as string;
    const value = takeValue(argv, i, flag);
    switch (flag) {
      case "--algebra": {
        const { label, rest } = parseLabelled(value, flag);
        algebra.push({ label, path: rest });
        break;
      }
      case "--group": {
        const { label, rest } = parseLabelled(value, flag);
        group.push({ label, path: rest });
        break;
      }
      case "--block": block = value; break;
      case "--pair": pair = value; break;
      case "--out": out = value; break;
      default: throw new ArgError(`unknown flag ${flag}`);
    }
  }
  if (algebra.length === 0 || !block || !pair || !out) {
    throw new ArgError("sets needs --algebra, --block, --pair and --out");
  }
  const result = plotSets({ algebra, group, block: block as Block, pair: pair as Pair });
  writeFileSync(out, result.svg);
  console.log(`wrote ${out}`);
}

function runHistories(argv: string[]): void {
  const cases: HistoryCase[] = [];
  let out = "";
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i] as string;
    const value = takeValue(argv, i, flag);
    switch (flag) {
      case "--case": {
        const { label, rest } = parseLabelled(value, flag);
        const colon = rest.indexOf(":");
        if (colon <= 0) {
          throw new ArgError(`--case expects LABEL=HISTORY.csv:BOUNDS.json, got "${value}"`);
        }
        cases.push({
          label,
          historyPath: rest.slice(0, colon),
          boundsPath: rest.slice(colon + 1),
        });
        break;
      }
      case "--out": out = value; break;
      default: throw new ArgError(`unknown flag ${flag}`);
    }
  }
  if (cases.length === 0 || !out) {
    throw new ArgError("histories needs --case and --out");
  }
  const result = plotHistories({ cases });
  writeFileSync(out, result.svg);
  console.log(`wrote ${out}`);
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command === "sets") {
      runSets(rest);
    } else if (command === "histories") {
      runHistories(rest);
    } else {
      console.error(USAGE);
      return command === undefined || command === "--help" ? 0 : 2;
    }
    return 0;
  } catch (err) {
    if (err instanceof ArgError) {
      console.error(`error: ${err.message}\n${USAGE}`);
      return 2;
    }
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exitCode = main(process.argv.slice(2));
}
