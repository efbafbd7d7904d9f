/**
 * The export pipeline: run a dense classifier over an image dataset and
 * write activation traces per split, per perturbation category, and for
 * an optional novelty dataset. The exporter only produces trace files;
 * all monitor logic lives with the consumer.
 */
import { mkdirSync } from 'node:fs';
import { join } from 'node:path';

import { Dataset, ImageSample, Split, bySplit, loadDataset } from './dataset.js';
import { DatasetError } from './errors.js';
import { CaptureSpec, Net, capture, forward, inputDim, loadNet, predict, resolveLayer } from './net.js';
import { Perturbation, applyPerturbation, perturbationLabel } from './perturb.js';
import { Rng } from './rng.js';
import { TraceMetaRecord, TraceSampleRecord, writeTrace } from './trace.js';

export interface ExportSpec {
  modelPath: string;
  dataPath: string;
  layers: string[];
  perturbations: Perturbation[];
  outDir: string;
  batchSize: number;
  seed: number;
  noveltyPath?: string;
}

export interface ExportResult {
  files: string[];
  captured: CaptureSpec[];
}

function checkDims(net: Net, data: Dataset, path: string): void {
  const dim = data.width * data.height;
  if (dim !== inputDim(net)) {
    throw new DatasetError(
      `dataset ${path} has ${dim}-pixel images but the model expects ${inputDim(net)} inputs`,
    );
  }
}

function traceSamples(
  net: Net,
  captures: CaptureSpec[],
  images: ImageSample[],
  batchSize: number,
  tags: string[],
  pixelsOf: (sample: ImageSample) => number[] = (s) => s.pixels,
): TraceSampleRecord[] {
  const records: TraceSampleRecord[] = [];
  // batches only bound peak memory; ordering stays the dataset order
  for (let start = 0; start < images.length; start += batchSize) {
    for (const sample of images.slice(start, start + batchSize)) {
      const trace = forward(net, pixelsOf(sample));
      const vectors = new Map<string, number[]>();
      for (const spec of captures) vectors.set(spec.name, capture(trace, spec));
      records.push({
        id: sample.id,
        trueLabel: sample.label,
        predLabel: predict(trace),
        tags,
        vectors,
      });
    }
  }
  return records;
}

export function exportTraces(spec: ExportSpec): ExportResult {
  if (spec.layers.length === 0) {
    throw new DatasetError('no layers requested');
  }
  if (spec.batchSize < 1) {
    throw new DatasetError(`batch size must be >= 1, got ${spec.batchSize}`);
  }
  const net = loadNet(spec.modelPath);
  const data = loadDataset(spec.dataPath);
  checkDims(net, data, spec.dataPath);
  const captures = spec.layers.map((name) => resolveLayer(net, name));

  mkdirSync(spec.outDir, { recursive: true });
  const meta = (source: string): TraceMetaRecord => ({
    classCount: data.classes,
    layers: captures.map((c) => ({ name: c.name, dim: c.dim, quantity: c.quantity })),
    source,
  });

  const files: string[] = [];
  const emit = (name: string, source: string, records: TraceSampleRecord[]): void => {
    const path = join(spec.outDir, name);
    writeTrace(path, meta(source), records);
    files.push(path);
  };

  const splits = bySplit(data);
  for (const split of ['train', 'calib', 'test'] as Split[]) {
    const images = splits.get(split);
    if (images === undefined) continue;
    emit(`${split}.jsonl`, split, traceSamples(net, captures, images, spec.batchSize, []));
  }

  // perturbation categories are built from the test split (falling back
  // to everything when the dataset has no test split)
  const basis = splits.get('test') ?? data.samples;
  spec.perturbations.forEach((p, index) => {
    const rng = new Rng(spec.seed * 1000003 + index);
    const label = perturbationLabel(p);
    const records = traceSamples(net, captures, basis, spec.batchSize, [label], (s) =>
      applyPerturbation(s.pixels, data.width, data.height, p, rng),
    );
    emit(`oms_${label}.jsonl`, label, records);
  });

  if (spec.noveltyPath !== undefined) {
    const novelty = loadDataset(spec.noveltyPath);
    checkDims(net, novelty, spec.noveltyPath);
    if (novelty.classes !== data.classes) {
      throw new DatasetError(
        `novelty dataset declares ${novelty.classes} classes, main dataset ${data.classes}`,
      );
    }
    emit(
      'oms_novelty.jsonl',
      'new_world',
      traceSamples(net, captures, novelty.samples, spec.batchSize, ['novelty']),
    );
  }

  return { files, captured: captures };
}
