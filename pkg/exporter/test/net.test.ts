import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { LayerNotFound, ModelError } from '../src/errors.js';
import { Net, capture, forward, loadNet, predict, resolveLayer } from '../src/net.js';

// z = W^T a + b with W laid out (fan_in, fan_out)
const tinyNet: Net = {
  layers: [
    {
      weights: [
        [1, 0],
        [0, 1],
        [1, 1],
      ],
      bias: [0.5, -0.5],
      activation: 'relu',
    },
    {
      weights: [
        [1, -1],
        [2, 0],
      ],
      bias: [0, 0],
      activation: 'identity',
    },
  ],
};

function writeTmp(content: string): string {
  const dir = mkdtempSync(join(tmpdir(), 'exporter-net-'));
  const path = join(dir, 'net.json');
  writeFileSync(path, content);
  return path;
}

describe('forward', () => {
  it('computes z = W^T a + b layer by layer', () => {
    const trace = forward(tinyNet, [1, 2, 3]);
    expect(trace.preActivations[0]).toEqual([1 + 3 + 0.5, 2 + 3 - 0.5]);
    expect(trace.activations[0]).toEqual([4.5, 4.5]);
    expect(trace.preActivations[1]).toEqual([4.5 + 9, -4.5]);
  });

  it('relu clamps negatives only', () => {
    const trace = forward(tinyNet, [-10, 0, 0]);
    expect(trace.preActivations[0]).toEqual([-9.5, -0.5]);
    expect(trace.activations[0]).toEqual([0, 0]);
  });

  it('rejects wrong input dims', () => {
    expect(() => forward(tinyNet, [1, 2])).toThrow(ModelError);
  });
});

describe('predict', () => {
  it('takes the argmax of the head pre-activations', () => {
    expect(predict(forward(tinyNet, [1, 2, 3]))).toBe(0);
  });

  it('breaks ties toward the smaller index', () => {
    const net: Net = {
      layers: [{ weights: [[1, 1]], bias: [0, 0], activation: 'identity' }],
    };
    expect(predict(forward(net, [2]))).toBe(0);
  });
});

describe('resolveLayer', () => {
  it('maps levels onto dense layers', () => {
    expect(resolveLayer(tinyNet, 'Z2')).toMatchObject({ dim: 2, quantity: 'pre_activation' });
    expect(resolveLayer(tinyNet, 'A3')).toMatchObject({ dim: 2, quantity: 'activation' });
    expect(resolveLayer(tinyNet, 'A1')).toMatchObject({ dim: 3, quantity: 'activation' });
  });

  it('rejects unknown layers', () => {
    expect(() => resolveLayer(tinyNet, 'Z9')).toThrow(LayerNotFound);
    expect(() => resolveLayer(tinyNet, 'Q2')).toThrow(LayerNotFound);
    expect(() => resolveLayer(tinyNet, 'Z1')).toThrow(LayerNotFound);
  });

  it('captures the requested quantity', () => {
    const trace = forward(tinyNet, [1, 2, 3]);
    expect(capture(trace, resolveLayer(tinyNet, 'A1'))).toEqual([1, 2, 3]);
    expect(capture(trace, resolveLayer(tinyNet, 'Z2'))).toEqual([4.5, 4.5]);
  });
});

describe('loadNet', () => {
  it('round-trips a valid file', () => {
    const path = writeTmp(JSON.stringify(tinyNet));
    const net = loadNet(path);
    expect(net.layers).toHaveLength(2);
    expect(net.layers[0].activation).toBe('relu');
  });

  it('rejects malformed JSON and bad shapes', () => {
    expect(() => loadNet(writeTmp('not json'))).toThrow(ModelError);
    expect(() => loadNet(writeTmp('{"layers":[]}'))).toThrow(ModelError);
    const ragged = {
      layers: [{ weights: [[1, 2], [3]], bias: [0, 0], activation: 'relu' }],
    };
    expect(() => loadNet(writeTmp(JSON.stringify(ragged)))).toThrow(ModelError);
    const mismatched = {
      layers: [
        { weights: [[1]], bias: [0], activation: 'relu' },
        { weights: [[1], [2]], bias: [0], activation: 'identity' },
      ],
    };
    expect(() => loadNet(writeTmp(JSON.stringify(mismatched)))).toThrow(/fan_in/);
  });
});
