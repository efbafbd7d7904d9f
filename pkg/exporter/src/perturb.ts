/**
 * Image-space perturbations on flattened grayscale images in [0, 1].
 * Every kind with a magnitude takes it as a required parameter; there
 * are no hidden defaults.
 */
import { PerturbationError } from './errors.js';
import { Rng } from './rng.js';

export const KINDS = ['gaussian', 'salt_and_pepper', 'contrast', 'invert', 'light', 'rotate'] as const;
export type Kind = (typeof KINDS)[number];

export interface Perturbation {
  kind: Kind;
  param: number | null;
}

function clip01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

function requireParam(p: Perturbation): number {
  if (p.param === null || !Number.isFinite(p.param)) {
    throw new PerturbationError(`${p.kind} needs a numeric parameter`);
  }
  return p.param;
}

/** Rotate by angle (radians) about the image center, nearest neighbor. */
function rotateImage(pixels: number[], width: number, height: number, angle: number): number[] {
  const out = new Array<number>(pixels.length).fill(0);
  const cx = (width - 1) / 2;
  const cy = (height - 1) / 2;
  const cos = Math.cos(angle);
  const sin = Math.sin(angle);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      // sample the source location that maps onto (x, y)
      const dx = x - cx;
      const dy = y - cy;
      const sx = Math.round(cx + cos * dx + sin * dy);
      const sy = Math.round(cy - sin * dx + cos * dy);
      if (sx >= 0 && sx < width && sy >= 0 && sy < height) {
        out[y * width + x] = pixels[sy * width + sx];
      }
    }
  }
  return out;
}

export function applyPerturbation(
  pixels: number[],
  width: number,
  height: number,
  p: Perturbation,
  rng: Rng,
): number[] {
  if (pixels.length !== width * height) {
    throw new PerturbationError(`image has ${pixels.length} pixels, expected ${width * height}`);
  }
  switch (p.kind) {
    case 'gaussian': {
      const sigma = requireParam(p);
      if (sigma < 0) throw new PerturbationError('gaussian sigma must be >= 0');
      return pixels.map((v) => clip01(v + sigma * rng.normal()));
    }
    case 'salt_and_pepper': {
      const prob = requireParam(p);
      if (prob < 0 || prob > 1) throw new PerturbationError('salt_and_pepper p must lie in [0, 1]');
      return pixels.map((v) => {
        if (rng.uniform() >= prob) return v;
        return rng.uniform() < 0.5 ? 0 : 1;
      });
    }
    case 'contrast': {
      const factor = requireParam(p);
      if (factor < 0) throw new PerturbationError('contrast factor must be >= 0');
      // scale about mid-gray
      return pixels.map((v) => clip01(0.5 + factor * (v - 0.5)));
    }
    case 'invert':
      return pixels.map((v) => 1 - v);
    case 'light': {
      const shift = requireParam(p);
      return pixels.map((v) => clip01(v + shift));
    }
    case 'rotate':
      return rotateImage(pixels, width, height, requireParam(p));
  }
}

/** Parse a CLI list like "invert,gaussian:0.1" into perturbations. */
export function parsePerturbations(text: string): Perturbation[] {
  const result: Perturbation[] = [];
  if (text.trim() === '') return result;
  for (const part of text.split(',')) {
    const [kind, raw] = part.split(':', 2) as [string, string | undefined];
    if (!(KINDS as readonly string[]).includes(kind)) {
      throw new PerturbationError(`unknown perturbation ${kind}`);
    }
    if (raw === undefined) {
      result.push({ kind: kind as Kind, param: null });
    } else {
      const param = Number(raw);
      if (!Number.isFinite(param)) {
        throw new PerturbationError(`bad parameter ${raw} for ${kind}`);
      }
      result.push({ kind: kind as Kind, param });
    }
  }
  return result;
}

export function perturbationLabel(p: Perturbation): string {
  if (p.param === null) return p.kind;
  // compact float formatting, matching JSON number output
  return `${p.kind}_${p.param}`;
}
