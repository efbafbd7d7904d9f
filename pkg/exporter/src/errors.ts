export class LayerNotFound extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'LayerNotFound';
  }
}

export class DatasetError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'DatasetError';
  }
}

export class ModelError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ModelError';
  }
}

export class PerturbationError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'PerturbationError';
  }
}
