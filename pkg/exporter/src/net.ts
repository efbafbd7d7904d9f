/**
 * Dense feed-forward nets in the actmon net.json format.
 *
 * A layer stores its weight matrix with shape (fan_in, fan_out), so the
 * forward rule is z = W^T a + b. Layer levels follow the trace naming
 * scheme: level 1 is the network input (A1), level 2 the first dense
 * layer, so dense layer index = level - 2.
 */
import { readFileSync } from 'node:fs';
import { z } from 'zod';

import { LayerNotFound, ModelError } from './errors.js';

export type Activation = 'relu' | 'identity' | 'sigmoid';

export interface DenseLayer {
  weights: number[][]; // (fan_in, fan_out)
  bias: number[];
  activation: Activation;
}

export interface Net {
  layers: DenseLayer[];
}

const layerSchema = z.object({
  weights: z.array(z.array(z.number())).min(1),
  bias: z.array(z.number()),
  activation: z.enum(['relu', 'identity', 'sigmoid']),
});

const netSchema = z.object({ layers: z.array(layerSchema).min(1) });

export function loadNet(path: string): Net {
  let parsed: unknown;
  try {
    parsed = JSON.parse(readFileSync(path, 'utf8'));
  } catch (err) {
    throw new ModelError(`cannot read model ${path}: ${(err as Error).message}`);
  }
  const result = netSchema.safeParse(parsed);
  if (!result.success) {
    throw new ModelError(`model ${path} is not a valid net: ${result.error.issues[0].message}`);
  }
  const net = result.data as Net;
  let fanIn = net.layers[0].weights.length;
  for (const [i, layer] of net.layers.entries()) {
    const out = layer.bias.length;
    if (layer.weights.length !== fanIn) {
      throw new ModelError(`layer ${i}: expected fan_in ${fanIn}, got ${layer.weights.length}`);
    }
    for (const row of layer.weights) {
      if (row.length !== out) {
        throw new ModelError(`layer ${i}: ragged weight rows (want width ${out})`);
      }
    }
    fanIn = out;
  }
  return net;
}

export function inputDim(net: Net): number {
  return net.layers[0].weights.length;
}

export function outputDim(net: Net): number {
  return net.layers[net.layers.length - 1].bias.length;
}

function applyActivation(kind: Activation, values: number[]): number[] {
  switch (kind) {
    case 'relu':
      return values.map((v) => (v < 0 ? 0 : v));
    case 'sigmoid':
      return values.map((v) => 1 / (1 + Math.exp(-v)));
    case 'identity':
      return values.slice();
  }
}

export interface ForwardTrace {
  input: number[];
  preActivations: number[][]; // one per dense layer
  activations: number[][];
}

export function forward(net: Net, input: number[]): ForwardTrace {
  if (input.length !== inputDim(net)) {
    throw new ModelError(`input has dim ${input.length}, net expects ${inputDim(net)}`);
  }
  const preActivations: number[][] = [];
  const activations: number[][] = [];
  let a = input;
  for (const layer of net.layers) {
    const out = layer.bias.length;
    const zVec = new Array<number>(out);
    for (let j = 0; j < out; j++) {
      let acc = layer.bias[j];
      for (let i = 0; i < a.length; i++) acc += layer.weights[i][j] * a[i];
      zVec[j] = acc;
    }
    preActivations.push(zVec);
    a = applyActivation(layer.activation, zVec);
    activations.push(a);
  }
  return { input: input.slice(), preActivations, activations };
}

/** Argmax of the final pre-activations; ties go to the smallest index. */
export function predict(trace: ForwardTrace): number {
  const head = trace.preActivations[trace.preActivations.length - 1];
  let best = 0;
  for (let j = 1; j < head.length; j++) {
    if (head[j] > head[best]) best = j;
  }
  return best;
}

const LAYER_NAME = /^([ZA])(\d+)$/;

export interface CaptureSpec {
  name: string;
  level: number;
  quantity: 'pre_activation' | 'activation';
  dim: number;
}

/** Resolve a trace layer name like Z3 against the net's architecture. */
export function resolveLayer(net: Net, name: string): CaptureSpec {
  const match = LAYER_NAME.exec(name);
  if (match === null) {
    throw new LayerNotFound(`layer name ${name} does not match Z<level>/A<level>`);
  }
  const level = Number(match[2]);
  const quantity = match[1] === 'Z' ? 'pre_activation' : 'activation';
  if (level === 1) {
    if (quantity === 'pre_activation') {
      throw new LayerNotFound('level 1 is the raw input; only A1 exists');
    }
    return { name, level, quantity, dim: inputDim(net) };
  }
  const index = level - 2;
  if (index < 0 || index >= net.layers.length) {
    throw new LayerNotFound(
      `layer ${name} is outside the net (levels 2..${net.layers.length + 1})`,
    );
  }
  return { name, level, quantity, dim: net.layers[index].bias.length };
}

export function capture(trace: ForwardTrace, spec: CaptureSpec): number[] {
  if (spec.level === 1) return trace.input.slice();
  const index = spec.level - 2;
  const source =
    spec.quantity === 'pre_activation' ? trace.preActivations[index] : trace.activations[index];
  return source.slice();
}
