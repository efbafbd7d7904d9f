/**
 * Labeled image datasets as a single JSON file: grayscale images with
 * pixel values in [0, 1], flattened row-major, plus a split tag so one
 * file can carry train/calib/test partitions.
 */
import { readFileSync } from 'node:fs';
import { z } from 'zod';

import { DatasetError } from './errors.js';

export const SPLITS = ['train', 'calib', 'test'] as const;
export type Split = (typeof SPLITS)[number];

export interface ImageSample {
  id: string;
  label: number;
  split: Split;
  pixels: number[];
}

export interface Dataset {
  width: number;
  height: number;
  classes: number;
  samples: ImageSample[];
}

const sampleSchema = z.object({
  id: z.string().min(1),
  label: z.number().int().nonnegative(),
  split: z.enum(SPLITS).default('train'),
  pixels: z.array(z.number()),
});

const datasetSchema = z.object({
  width: z.number().int().positive(),
  height: z.number().int().positive(),
  classes: z.number().int().min(2),
  samples: z.array(sampleSchema).min(1),
});

export function loadDataset(path: string): Dataset {
  let parsed: unknown;
  try {
    parsed = JSON.parse(readFileSync(path, 'utf8'));
  } catch (err) {
    throw new DatasetError(`cannot read dataset ${path}: ${(err as Error).message}`);
  }
  const result = datasetSchema.safeParse(parsed);
  if (!result.success) {
    const issue = result.error.issues[0];
    throw new DatasetError(`dataset ${path}: ${issue.path.join('.')}: ${issue.message}`);
  }
  const data = result.data as Dataset;
  const dim = data.width * data.height;
  const seen = new Set<string>();
  for (const sample of data.samples) {
    if (seen.has(sample.id)) {
      throw new DatasetError(`duplicate sample id ${sample.id}`);
    }
    seen.add(sample.id);
    if (sample.pixels.length !== dim) {
      throw new DatasetError(
        `sample ${sample.id}: ${sample.pixels.length} pixels, expected ${dim}`,
      );
    }
    if (sample.label >= data.classes) {
      throw new DatasetError(
        `sample ${sample.id}: label ${sample.label} outside [0, ${data.classes})`,
      );
    }
    for (const p of sample.pixels) {
      if (!Number.isFinite(p) || p < 0 || p > 1) {
        throw new DatasetError(`sample ${sample.id}: pixel values must lie in [0, 1]`);
      }
    }
  }
  return data;
}

export function bySplit(data: Dataset): Map<Split, ImageSample[]> {
  const groups = new Map<Split, ImageSample[]>();
  for (const sample of data.samples) {
    const bucket = groups.get(sample.split);
    if (bucket === undefined) groups.set(sample.split, [sample]);
    else bucket.push(sample);
  }
  return groups;
}
