/**
 * Writer for the actmon trace JSONL format.
 *
 * Line 1 is a meta record naming the captured layers; every following
 * line is one sample. Field order is fixed and floats use the shortest
 * round-tripping decimal (plain JSON.stringify), so identical inputs
 * always produce identical bytes.
 */
import { writeFileSync } from 'node:fs';

export interface LayerSpecRecord {
  name: string;
  dim: number;
  quantity: 'pre_activation' | 'activation';
}

export interface TraceMetaRecord {
  classCount: number;
  layers: LayerSpecRecord[];
  source: string;
}

export interface TraceSampleRecord {
  id: string;
  trueLabel: number;
  predLabel: number;
  tags: string[];
  vectors: Map<string, number[]>;
}

export function metaLine(meta: TraceMetaRecord): string {
  return JSON.stringify({
    kind: 'meta',
    class_count: meta.classCount,
    layers: meta.layers.map((l) => ({ name: l.name, dim: l.dim, quantity: l.quantity })),
    source: meta.source,
  });
}

export function sampleLine(meta: TraceMetaRecord, sample: TraceSampleRecord): string {
  const vectors: Record<string, number[]> = {};
  for (const layer of meta.layers) {
    const vec = sample.vectors.get(layer.name);
    if (vec === undefined) {
      throw new Error(`sample ${sample.id} lacks layer ${layer.name}`);
    }
    vectors[layer.name] = vec;
  }
  return JSON.stringify({
    kind: 'sample',
    id: sample.id,
    true_label: sample.trueLabel,
    pred_label: sample.predLabel,
    tags: [...sample.tags].sort(),
    vectors,
  });
}

export function writeTrace(
  path: string,
  meta: TraceMetaRecord,
  samples: TraceSampleRecord[],
): void {
  const lines = [metaLine(meta)];
  for (const sample of samples) lines.push(sampleLine(meta, sample));
  writeFileSync(path, lines.join('\n') + '\n');
}
