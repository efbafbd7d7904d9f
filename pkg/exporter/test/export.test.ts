import { mkdtempSync, readFileSync, readdirSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { fileURLToPath } from 'node:url';

import { describe, expect, it } from 'vitest';

import { loadDataset } from '../src/dataset.js';
import { LayerNotFound } from '../src/errors.js';
import { ExportSpec, exportTraces } from '../src/export.js';
import { forward, loadNet, predict } from '../src/net.js';

const FIXTURES = fileURLToPath(new URL('../fixtures', import.meta.url));

function makeSpec(outDir: string, over: Partial<ExportSpec> = {}): ExportSpec {
  return {
    modelPath: join(FIXTURES, 'model.json'),
    dataPath: join(FIXTURES, 'dataset.json'),
    layers: ['Z3'],
    perturbations: [],
    outDir,
    batchSize: 64,
    seed: 7,
    ...over,
  };
}

function tmp(): string {
  return mkdtempSync(join(tmpdir(), 'exporter-run-'));
}

describe('exportTraces', () => {
  it('writes one file per split with header plus samples', () => {
    const out = tmp();
    const result = exportTraces(makeSpec(out));
    expect(readdirSync(out).sort()).toEqual(['calib.jsonl', 'test.jsonl', 'train.jsonl']);
    expect(result.captured[0]).toMatchObject({ name: 'Z3', dim: 16 });

    const data = loadDataset(join(FIXTURES, 'dataset.json'));
    const trainCount = data.samples.filter((s) => s.split === 'train').length;
    const lines = readFileSync(join(out, 'train.jsonl'), 'utf8').trimEnd().split('\n');
    expect(lines).toHaveLength(trainCount + 1);
    const meta = JSON.parse(lines[0]);
    expect(meta).toMatchObject({
      kind: 'meta',
      class_count: 3,
      layers: [{ name: 'Z3', dim: 16, quantity: 'pre_activation' }],
      source: 'train',
    });
  });

  it('records pred_label as the model argmax and matching vectors', () => {
    const out = tmp();
    exportTraces(makeSpec(out, { layers: ['A1', 'Z3'] }));
    const net = loadNet(join(FIXTURES, 'model.json'));
    const lines = readFileSync(join(out, 'calib.jsonl'), 'utf8').trimEnd().split('\n');
    for (const line of lines.slice(1, 21)) {
      const record = JSON.parse(line);
      const trace = forward(net, record.vectors.A1);
      expect(record.pred_label).toBe(predict(trace));
      expect(record.vectors.Z3).toEqual(trace.preActivations[1]);
    }
  });

  it('is byte identical across reruns with one seed', () => {
    const a = tmp();
    const b = tmp();
    const spec = { perturbations: [{ kind: 'gaussian' as const, param: 0.1 }] };
    exportTraces(makeSpec(a, spec));
    exportTraces(makeSpec(b, spec));
    for (const name of readdirSync(a)) {
      expect(readFileSync(join(a, name))).toEqual(readFileSync(join(b, name)));
    }
    expect(readdirSync(a)).toContain('oms_gaussian_0.1.jsonl');
  });

  it('perturbation files keep true labels and tag the category', () => {
    const out = tmp();
    exportTraces(makeSpec(out, { perturbations: [{ kind: 'invert', param: null }] }));
    const lines = readFileSync(join(out, 'oms_invert.jsonl'), 'utf8').trimEnd().split('\n');
    const data = loadDataset(join(FIXTURES, 'dataset.json'));
    const testSamples = data.samples.filter((s) => s.split === 'test');
    expect(lines).toHaveLength(testSamples.length + 1);
    const record = JSON.parse(lines[1]);
    expect(record.tags).toEqual(['invert']);
    expect(record.true_label).toBe(testSamples[0].label);
  });

  it('exports a tagged novelty category', () => {
    const out = tmp();
    exportTraces(makeSpec(out, { noveltyPath: join(FIXTURES, 'novelty.json') }));
    const lines = readFileSync(join(out, 'oms_novelty.jsonl'), 'utf8').trimEnd().split('\n');
    expect(lines).toHaveLength(61);
    expect(JSON.parse(lines[0]).source).toBe('new_world');
    expect(JSON.parse(lines[3]).tags).toEqual(['novelty']);
  });

  it('rejects unknown layers before writing anything', () => {
    const out = tmp();
    expect(() => exportTraces(makeSpec(out, { layers: ['Z99'] }))).toThrow(LayerNotFound);
    expect(readdirSync(out)).toEqual([]);
  });
});
