import { SchemaError } from "./csv.js";
import { renderReports } from "./render.js";

function usage(): never {
  console.error("usage: vptrap-render render --in DIR --out DIR");
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv[0] !== "render") {
    usage();
  }
  let inDir: string | undefined;
  let outDir: string | undefined;
  for (let i = 1; i < argv.length; i += 2) {
    if (argv[i] === "--in") {
      inDir = argv[i + 1];
    } else if (argv[i] === "--out") {
      outDir = argv[i + 1];
    } else {
      usage();
    }
  }
  if (!inDir || !outDir) {
    usage();
  }
  try {
    const result = renderReports(inDir, outDir);
    for (const line of result.summary) {
      console.log(line);
    }
    console.log(`wrote ${result.written.join(", ")} to ${outDir}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
