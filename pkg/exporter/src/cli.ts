#!/usr/bin/env node
/**
 * actmon-export: dump activation traces from a dense classifier.
 *
 *   actmon-export export --model net.json --data images.json \
 *     --layers Z3 --perturb invert,gaussian:0.1 --out traces/ --seed 7
 */
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { exportTraces } from './export.js';
import { parsePerturbations } from './perturb.js';

export async function main(argv: string[]): Promise<number> {
  let failed = false;
  const parser = yargs(argv)
    .command(
      'export',
      'run the model over a dataset and write trace files',
      (cmd) =>
        cmd
          .option('model', { type: 'string', demandOption: true, describe: 'net JSON file' })
          .option('data', { type: 'string', demandOption: true, describe: 'dataset JSON file' })
          .option('layers', {
            type: 'string',
            demandOption: true,
            describe: 'comma list of layer names, e.g. Z3 or A1,Z2',
          })
          .option('perturb', {
            type: 'string',
            default: '',
            describe: 'comma list of kind or kind:param entries',
          })
          .option('novelty', { type: 'string', describe: 'novelty dataset JSON file' })
          .option('out', { type: 'string', demandOption: true, describe: 'output directory' })
          .option('batch', { type: 'number', default: 64 })
          .option('seed', { type: 'number', default: 0 }),
      (args) => {
        const result = exportTraces({
          modelPath: args.model,
          dataPath: args.data,
          layers: args.layers.split(',').filter((s) => s !== ''),
          perturbations: parsePerturbations(args.perturb),
          noveltyPath: args.novelty,
          outDir: args.out,
          batchSize: args.batch,
          seed: args.seed,
        });
        for (const file of result.files) console.log(file);
      },
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      if (err !== undefined && err !== null) throw err;
      console.error(msg);
      failed = true;
    });

  try {
    await parser.parseAsync();
  } catch (err) {
    const e = err as Error;
    console.error(`${e.name}: ${e.message}`);
    return 1;
  }
  return failed ? 2 : 0;
}

const invokedDirectly = process.argv[1] !== undefined && import.meta.url.endsWith('cli.js');
if (invokedDirectly) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
