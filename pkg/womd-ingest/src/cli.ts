#!/usr/bin/env node
/** Command line: convert WOMD container files to interchange JSONL. */

import * as fs from "fs";
import * as path from "path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { ConversionReport, ConvertOptions, convertBuffer } from "./convert";

export function expandGlob(pattern: string): string[] {
  // supports a single '*' in the basename, which covers tfrecord shards
  const dir = path.dirname(pattern);
  const base = path.basename(pattern);
  if (!base.includes("*")) {
    return fs.existsSync(pattern) ? [pattern] : [];
  }
  const re = new RegExp(
    "^" + base.split("*").map((s) => s.replace(/[.+?^${}()|[\]\\]/g, "\\$&")).join(".*") + "$");
  if (!fs.existsSync(dir)) return [];
  return fs.readdirSync(dir)
    .filter((name) => re.test(name))
    .sort()
    .map((name) => path.join(dir, name));
}

export function convertFiles(files: string[], outputPath: string,
                             options: ConvertOptions): ConversionReport {
  const report: ConversionReport = {
    filesRead: 0,
    converted: 0,
    skipped: { "not-eligible": 0, "missing-map": 0, "parse-error": 0 },
    outputPath,
  };
  const out = fs.openSync(outputPath, "w");
  try {
    for (const file of files) {
      if (options.limit !== undefined && report.converted >= options.limit) break;
      const remaining = options.limit === undefined
        ? undefined : options.limit - report.converted;
      const data = fs.readFileSync(file);
      const result = convertBuffer(data, { ...options, limit: remaining });
      report.filesRead++;
      for (const record of result.records) {
        fs.writeSync(out, JSON.stringify(record) + "\n");
      }
      report.converted += result.records.length;
      for (const reason of ["not-eligible", "missing-map", "parse-error"] as const) {
        report.skipped[reason] += result.skipped[reason];
      }
    }
  } finally {
    fs.closeSync(out);
  }
  return report;
}

export function main(argv: string[]): number {
  const args = yargs(argv)
    .option("input-glob", { type: "string", demandOption: true,
                            describe: "WOMD tfrecord file or pattern (dir/*.tfrecord*)" })
    .option("output", { type: "string", demandOption: true,
                        describe: "Interchange JSONL output path" })
    .option("prefilter-eligible", { type: "boolean", default: false,
                                    describe: "Drop scenarios failing the AV speed rule" })
    .option("limit", { type: "number",
                       describe: "Stop after this many converted scenarios" })
    .strict()
    .parseSync();

  const files = expandGlob(args["input-glob"]);
  if (files.length === 0) {
    console.error(`no input files match ${args["input-glob"]}`);
    return 2;
  }
  const report = convertFiles(files, args.output, {
    prefilterEligible: args["prefilter-eligible"],
    limit: args.limit,
  });
  const total = report.converted + report.skipped["not-eligible"]
    + report.skipped["missing-map"] + report.skipped["parse-error"];
  console.log(`files read: ${report.filesRead}`);
  console.log(`scenarios: ${total} seen, ${report.converted} converted`);
  console.log(`skipped: not-eligible ${report.skipped["not-eligible"]}, `
    + `missing-map ${report.skipped["missing-map"]}, `
    + `parse-error ${report.skipped["parse-error"]}`);
  console.log(`wrote ${report.outputPath}`);
  return report.converted > 0 ? 0 : 3;
}

if (require.main === module) {
  process.exit(main(hideBin(process.argv)));
}
