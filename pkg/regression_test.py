""" Property and oracle checks, run by `nca-scope test` after the doctests.
    pytest collects the test_* functions too. The slow_* ones train models and take
    minutes; only `nca-scope test --slow` runs them.
"""

import os
import tempfile
import time
import warnings
from collections import Counter

import numpy as np

from analysis import autoencoders, extract, fields, fixtures, homology, pca, plots
from experiment import Experiment
from nca import engine, rng, surrogate, trainer
from nca.errors import ComplexTooLarge, ConfigError
from nca.events import EventScript, perturbEvent, signalEvent
from nca.grid import ChannelMode, GridState, seedState
from nca.model import loadModel, modelHash, modelInit
from nca.trajectory import Trajectory, loadTrajectory, saveTrajectory

HERE = os.path.dirname(os.path.abspath(__file__))

def checks(slow=False):
  prefixes = ('test_', 'slow_') if slow else ('test_',)
  return sorted((name, check) for name, check in globals().items() if name.startswith(prefixes) and callable(check))

def samples(seed):
  return rng.generator(seed, rng.SAMPLING)

def persistence(points, **kwargs):
  return homology.ripsPersistence(homology.distanceMatrix(points), **kwargs)

def runRecipe(name, outdir):
  e = Experiment(outdir)
  e.load(os.path.join(HERE, name))
  e.run()
  return e

# Engine

def scalarUpdate(values, model, seed, step):
  """ One update step written out cell by cell with plain floats. """
  height, width, channels = values.shape
  kernels = np.asarray(model.kernels, dtype=np.float64)
  w1, b1, w2 = (np.asarray(a, dtype=np.float64) for a in (model.w1, model.b1, model.w2))
  fire = rng.fireMask(seed, step, (1, height, width), model.fireRate)[0]
  new = np.array(values, dtype=np.float64)
  for i in range(height):
    for j in range(width):
      perception = []
      for k in range(len(kernels)):
        for c in range(channels):
          total = 0.0
          for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
              total += kernels[k, di + 1, dj + 1] * values[(i + di) % height, (j + dj) % width, c]
          perception.append(total)
      hidden = []
      for n in range(len(b1)):
        total = b1[n]
        for p, x in enumerate(perception):
          total += x * w1[p, n]
        hidden.append(max(total, 0.0))
      if fire[i, j]:
        for c in range(channels):
          new[i, j, c] += sum(h * w2[n, c] for n, h in enumerate(hidden))

  def pooled(a, i, j):
    return max(a[(i + di) % height, (j + dj) % width, 3] for di in (-1, 0, 1) for dj in (-1, 0, 1))

  out = np.zeros_like(new)
  for i in range(height):
    for j in range(width):
      if pooled(values, i, j) > model.aliveThreshold and pooled(new, i, j) > model.aliveThreshold:
        out[i, j] = new[i, j]
  return out

def test_update_step_matches_scalar_oracle():
  g = samples(11)
  values = g.uniform(0.0, 1.0, size=(4, 4, 6))
  values[:, :, 3] = g.uniform(0.0, 0.2, size=(4, 4))
  model = modelInit(6, 8, seed=4, w2Scale=0.2).astype(np.float64)
  model = model.replace(b1=g.normal(scale=0.1, size=8))
  grid = GridState(values, dtype=np.float64)
  stepped = engine.updateStep(grid, model, seed=9, step=2).values
  expected = scalarUpdate(values, model, 9, 2)
  assert np.allclose(stepped, expected, rtol=1e-6, atol=1e-12)

def test_perception_of_single_cell():
  values = np.zeros((3, 3, 4))
  values[1, 1, 0] = 1.0
  model = modelInit(4, 4).astype(np.float64)
  sobelX = engine.perceive(GridState(values, 'RGB_PLAIN', dtype=np.float64), model)[:, :, 4]
  # cross-correlation: the cell to the left sees the centre through the kernel's right column
  assert sobelX[1, 0] == model.kernels[1][1, 2]
  assert sobelX[1, 2] == model.kernels[1][1, 0]
  assert sobelX[1, 1] == 0.0

def test_update_is_local():
  g = samples(12)
  values = g.uniform(0.0, 1.0, size=(12, 12, 6)).astype(np.float32)
  changed = values.copy()
  changed[6, 6] += 0.5
  model = modelInit(6, 16, seed=5, w2Scale=0.3, fireRate=1.0)
  a = engine.updateStep(GridState(values), model, 0).values
  b = engine.updateStep(GridState(changed), model, 0).values
  rows, cols = np.nonzero((a != b).any(axis=2))
  assert len(rows) > 0
  assert np.abs(rows - 6).max() <= 2 and np.abs(cols - 6).max() <= 2

def test_dead_grid_stays_dead():
  for seed in range(5):
    model = modelInit(6, 8, seed=seed, w2Scale=1.0, fireRate=1.0)
    model = model.replace(b1=samples(seed).normal(size=8))
    stepped = engine.updateStep(GridState(np.zeros((6, 6, 6))), model, seed).values
    assert not stepped.any()

def test_rollout_is_deterministic():
  model = modelInit(6, 8, seed=1, w2Scale=0.1)
  script = EventScript([signalEvent(3, (4, 4), 5, jitter=2), perturbEvent(6, (0, 0, 2, 2))])
  a = engine.rollout(model, seedState(8, 8, 6), 12, script, seed=7, recordEvery=2)
  b = engine.rollout(model, seedState(8, 8, 6), 12, script, seed=7, recordEvery=2)
  assert len(a) == 7
  assert np.array_equal(a.frames, b.frames)
  assert a.events.toJson() == b.events.toJson()

def test_fire_rate_sets_the_share_of_updated_cells():
  values = samples(14).uniform(0.0, 1.0, size=(16, 16, 6)).astype(np.float32)
  model = modelInit(6, 8, ChannelMode.RGB_PLAIN, seed=1, w2Scale=0.5, fireRate=0.3).replace(b1=np.full(8, 5.0))
  runs = 20
  updated = 0
  for seed in range(runs):
    stepped = engine.updateStep(GridState(values, 'RGB_PLAIN'), model, seed).values
    updated += int((stepped != values).any(axis=2).sum())
  cells = runs * 16 * 16
  assert abs(updated - 0.3 * cells) <= 3.0 * np.sqrt(cells * 0.3 * 0.7)

def smoothModel():
  """ Hidden units stay well inside the linear part of relu and alpha stays put, so the loss is smooth. """
  model = modelInit(6, 16, seed=2, w2Scale=0.01, fireRate=1.0)
  w2 = np.array(model.w2)
  w2[:, 3] = 0.0
  return model.replace(b1=np.full(16, 3.0), w2=w2)

def test_gradients_match_finite_differences():
  g = samples(3)
  initial = g.uniform(0.0, 1.0, size=(8, 8, 6))
  initial[:, :, 3] = 1.0
  target = g.uniform(0.0, 1.0, size=(8, 8, 4))
  config = trainer.TrainConfig(stepsMin=12, stepsMax=12, batchSize=1, poolSize=1)
  assert trainer.gradientCheck(smoothModel(), target, config, coordinates=100, initial=initial) < 1e-4

def test_one_epoch_moves_parameters_by_the_normalised_gradient():
  target = samples(13).uniform(0.0, 1.0, size=(6, 6, 4))
  model = smoothModel()
  config = trainer.TrainConfig(epochs=1, stepsMin=4, stepsMax=4, batchSize=1, poolSize=1, learningRate=1e-2,
    optimizer='sgd')
  trained, _ = trainer.train(model, target, config)
  for name in ('w1', 'b1', 'w2'):
    before = np.asarray(getattr(model, name), dtype=np.float64)
    gradient = np.array([trainer.finiteDiffGradient(model, target, config, (name, i)) for i in range(before.size)])
    step = -config.learningRate * gradient / (np.linalg.norm(gradient) + config.gradNormEps)
    moved = np.asarray(getattr(trained, name), dtype=np.float64) - before
    assert np.allclose(moved, step.reshape(before.shape), rtol=0.0, atol=1e-6), name

def test_zero_learning_rate_leaves_parameters_alone():
  target = samples(15).uniform(0.0, 1.0, size=(6, 6, 4))
  model = modelInit(6, 16, seed=3, w2Scale=0.1).replace(trainKernels=True)
  config = trainer.TrainConfig(epochs=3, stepsMin=4, stepsMax=6, batchSize=2, poolSize=4, learningRate=0.0)
  trained, _ = trainer.train(model, target, config)
  for name in ('kernels', 'w1', 'b1', 'w2'):
    assert np.array_equal(getattr(trained, name), getattr(model, name)), name

def test_kernels_stay_frozen_unless_trained():
  target = samples(15).uniform(0.0, 1.0, size=(6, 6, 4))
  model = modelInit(6, 16, seed=3, w2Scale=0.1)
  config = trainer.TrainConfig(epochs=3, stepsMin=4, stepsMax=6, batchSize=2, poolSize=4, learningRate=1e-2)
  frozen, _ = trainer.train(model, target, config)
  assert np.array_equal(frozen.kernels, model.kernels)
  assert not np.array_equal(frozen.w1, model.w1)
  thawed, _ = trainer.train(model.replace(trainKernels=True), target, config)
  assert not np.array_equal(thawed.kernels, model.kernels)

def test_training_converts_the_loss_without_warnings():
  target = samples(16).uniform(0.0, 1.0, size=(6, 6, 4))
  config = trainer.TrainConfig(epochs=2, stepsMin=2, stepsMax=2, batchSize=1, poolSize=2)
  with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter('always')
    trainer.train(modelInit(6, 8, seed=1, w2Scale=0.1), target, config)
  assert not [w for w in caught if 'requires_grad' in str(w.message)]

def test_trajectory_round_trip():
  model = surrogate.signalResponseModel()
  script = EventScript([signalEvent(5, (3, 3), surrogate.E, 0.1, 9), perturbEvent(20, (0, 0, 3, 6))])
  original = engine.rollout(model, surrogate.restState(6, 6), 60, script, seed=2, recordEvery=3)
  with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, 't.ncat')
    saveTrajectory(original, path)
    back = loadTrajectory(path)
    again = os.path.join(d, 'again.ncat')
    saveTrajectory(back, again)
    with open(path, 'rb') as f, open(again, 'rb') as g:
      assert f.read() == g.read()
  assert np.array_equal(back.frames, original.frames)
  assert back.events.toJson() == original.events.toJson()
  assert (back.recordEvery, back.seed, back.modelHash) == (3, 2, original.modelHash)

# Point clouds

def test_window_coverage():
  t = Trajectory(np.zeros((20, 20, 20, 3)), 'RGB_PLAIN')
  window = extract.windowSubsample(t, (0, 0, 20, 20))
  assert window.size == 8000
  assert extract.coverage(1000, window.size) == 0.125
  assert round(100 * extract.coverage(1000, 192 * 192 * 20), 3) == 0.136
  assert extract.coverage(1000, 500) == 1.0

def test_micro_extraction_counts():
  frames = np.zeros((3, 4, 4, 5))
  frames[:, :2, :, 3] = 1.0
  t = Trajectory(frames, 'RGBA_ALIVE')
  assert extract.extractMicroscopic(t).size == 3 * 8
  assert extract.extractMicroscopic(t, excludeDead=False).size == 3 * 16
  assert extract.extractMicroscopic(t, excludeDead=False, maxPoints=10).size == 10

def test_window_cells_are_micro_cells():
  t = Trajectory(samples(17).uniform(size=(6, 5, 7, 4)), 'RGB_PLAIN')
  micro = extract.extractMicroscopic(t, excludeDead=False)
  whole = extract.windowSubsample(t, (0, 0, 5, 7))
  assert np.array_equal(whole.points, micro.points)
  assert np.array_equal(whole.provenance, micro.provenance)
  cells = Counter(map(tuple, micro.points.tolist()))
  window = Counter(map(tuple, extract.windowSubsample(t, (1, 2, 4, 5), (2, 5)).points.tolist()))
  assert len(window) > 0 and not window - cells

def test_macro_points_reshape_to_frames():
  t = Trajectory(samples(18).uniform(size=(5, 3, 4, 6)), 'RGBA_ALIVE')
  cloud = extract.extractMacroscopic(t)
  for i, frame in enumerate(t.frames):
    assert np.array_equal(cloud.points[i].reshape(frame.shape), frame)

# Persistent homology

def test_circle_betti():
  assert homology.bettiReport(persistence(fixtures.circle(60))).counts == (1, 1, 0)

def test_noisy_circle_betti():
  assert homology.bettiReport(persistence(fixtures.noisyCircle())).counts == (1, 1, 0)

def test_two_rings_betti():
  assert homology.bettiReport(persistence(fixtures.twoRings())).counts == (2, 2, 0)

def test_sphere_betti():
  diagram = persistence(fixtures.fibonacciSphere(), maxRadius=fixtures.SPHERE_RADIUS)
  assert homology.bettiReport(diagram).counts == (1, 0, 1)

def test_torus_betti():
  diagram = persistence(fixtures.gridTorus(), maxRadius=fixtures.TORUS_RADIUS)
  assert homology.bettiReport(diagram, fixtures.TORUS_THRESHOLD).counts == (1, 2, 1)
def test_circle_death_near_sqrt3():
  loops = homology.significant(persistence(fixtures.circle(60)), 1.0).inDim(1)
  assert len(loops) == 1
  assert 1.70 <= loops.deaths[0] <= 1.76

def test_persistence_matches_naive_reduction():
  g = samples(5)
  for _ in range(50):
    n = int(g.integers(2, 13))
    points = g.normal(size=(n, int(g.integers(1, 4))))
    dist = homology.distanceMatrix(points)
    naive = homology.naivePersistence(dist)
    assert homology.ripsPersistence(dist) == naive
    assert homology.reducedPersistence(dist) == naive

def test_persistence_ignores_point_order():
  points = fixtures.noisyCircle(60)
  diagram = persistence(points)
  assert persistence(points[samples(19).permutation(len(points))]) == diagram
  assert len(diagram.inDim(0)) == len(points)

def test_persistence_at_the_point_budget_takes_seconds():
  points = fixtures.noisyCircle(homology.DEFAULT_BUDGET)
  started = time.perf_counter()
  diagram = persistence(points, maxDim=1)
  assert time.perf_counter() - started < 60.0
  assert homology.bettiReport(diagram).counts == (1, 1, 0)

def sameDiagram(a, b, tolerance):
  a = homology.significant(a, tolerance)
  b = homology.significant(b, tolerance)
  for dim in range(3):
    x, y = a.inDim(dim), b.inDim(dim)
    if len(x) != len(y):
      return False
    for first, second in ((x.births, y.births), (x.deaths, y.deaths)):
      first, second = np.sort(first), np.sort(second)
      if not np.array_equal(np.isinf(first), np.isinf(second)):
        return False
      finite = np.isfinite(first)
      if not np.allclose(first[finite], second[finite], rtol=0.0, atol=tolerance):
        return False
  return True

def test_persistence_is_isometry_invariant():
  points = fixtures.noisyCircle(40)
  rotation, _ = np.linalg.qr(samples(6).normal(size=(3, 3)))
  moved = points @ rotation.T + np.array([3.0, -1.0, 2.5])
  assert sameDiagram(persistence(points), persistence(moved), 1e-9)

def test_persistence_scales_exactly():
  points = fixtures.circle(60)
  assert persistence(2.0 * points) == persistence(points).scaled(2.0)

def test_complex_too_large_is_reported():
  try:
    persistence(fixtures.circle(60), limit=100)
  except ComplexTooLarge as e:
    assert "Subsample" in str(e)
  else:
    assert False, "expected ComplexTooLarge"

# Linear projection and autoencoders

def test_pca_reconstructs_rank_two_data():
  g = samples(7)
  data = g.normal(size=(100, 2)) @ g.normal(size=(2, 30)) + 5.0
  basis = pca.pcaFit(data, 2)
  assert np.abs(basis.reconstruct(basis.project(data)) - data).max() < 1e-8

def test_pca_gram_path_matches_svd():
  g = samples(8)
  data = 10.0 * g.normal(size=(50, 2)) @ g.normal(size=(2, 5000)) + 0.1 * g.normal(size=(50, 5000))
  basis = pca.pcaFit(data, 2)
  _, _, vt = np.linalg.svd(data - data.mean(axis=0), full_matrices=False)
  assert pca.principalAngles(basis.components, vt[:2]).max() < 1e-6

def test_pca_matches_full_covariance_eigendecomposition():
  g = samples(20)
  rotation, _ = np.linalg.qr(g.normal(size=(12, 12)))
  data = g.normal(size=(80, 12)) * 2.0 ** -np.arange(12) @ rotation
  basis = pca.pcaFit(data, 4)
  values, vectors = np.linalg.eig(np.cov(data, rowvar=False))
  order = np.argsort(-values.real)[:4]
  assert pca.principalAngles(basis.components, vectors.real[:, order].T).max() < 1e-6
  assert np.allclose(basis.explainedVariance, values.real[order], rtol=1e-8, atol=0.0)

def test_pca_variance_of_an_isotropic_sample():
  n, dim = 2000, 5
  basis = pca.pcaFit(samples(21).normal(size=(n, dim)), dim)
  assert abs(basis.explainedVariance.sum() - dim) < 3.0 * np.sqrt(2.0 * dim / (n - 1))

def test_pca_ignores_duplicated_points():
  data = samples(22).normal(size=(30, 6)) * np.array([3.0, 2.0, 1.5, 1.0, 0.5, 0.2])
  once, twice = pca.pcaFit(data, 3), pca.pcaFit(np.concatenate([data, data]), 3)
  assert np.allclose(once.mean, twice.mean)
  assert np.allclose(np.abs((once.components * twice.components).sum(axis=1)), 1.0, atol=1e-8)

def test_linear_autoencoder_finds_pca_subspace():
  g = samples(9)
  data = g.normal(size=(200, 2)) @ g.normal(size=(2, 6)) + 0.01 * g.normal(size=(200, 6)) + 1.0
  model, losses = autoencoders.aeFit(data, {'kind': 'linear'}, epochs=2000, learningRate=1e-2, lrDecay=1e-2)
  decoder = model.decoder.weight.detach().numpy().astype(np.float64).T
  assert pca.principalAngles(decoder, pca.pcaFit(data, 2).components).max() < 0.05
  assert losses[-1] < losses[0]

def test_sparse_autoencoder_keeps_unit_atoms():
  g = samples(10)
  data = np.maximum(g.normal(size=(120, 5)), 0.0)
  model, stats = autoencoders.saeFit(data, expansion=4, l1Coefficient=1e-3, epochs=50, learningRate=1e-2)
  norms = model.decoder.weight.detach().norm(dim=0).numpy()
  assert np.allclose(norms, 1.0, atol=1e-5)
  assert 0.0 <= stats.deadFeatureFraction <= 1.0
  assert 0.0 <= stats.meanActiveFeatures <= model.dictSize
  assert autoencoders.saeEncode(model, data).min() >= 0.0

def test_full_width_autoencoder_encodes_its_own_reconstructions():
  data = samples(23).normal(size=(100, 3))
  model, losses = autoencoders.aeFit(data, {'kind': 'linear', 'latent': 3}, epochs=2000, learningRate=1e-2,
    lrDecay=1e-3)
  assert losses[-1] < 1e-6
  codes = autoencoders.aeEncode(model, data)
  again = autoencoders.aeEncode(model, autoencoders.aeDecode(model, codes))
  assert np.abs(again - codes).max() < 1e-3

def test_unpenalised_dictionary_reconstructs_exactly():
  data = np.tile(samples(24).uniform(0.1, 1.0, size=(3, 3)), (10, 1))
  _, stats = autoencoders.saeFit(data, expansion=4, l1Coefficient=0.0, epochs=3000, learningRate=1e-2, lrDecay=1e-4)
  assert stats.reconstructionMse < 1e-8

def sparseDictionaryData(count, seed):
  """ Nonnegative 3-sparse mixtures of 8 unit atoms in 64 dimensions. """
  g = samples(seed)
  atoms = g.normal(size=(8, 64))
  atoms /= np.linalg.norm(atoms, axis=1, keepdims=True)
  codes = np.zeros((count, 8))
  for row in codes:
    row[g.choice(8, 3, replace=False)] = g.uniform(0.5, 1.5, size=3)
  return codes @ atoms

def slow_sparse_autoencoder_recovers_sparse_codes():
  data = sparseDictionaryData(4000, 13)
  model, stats = autoencoders.saeFit(data, expansion=1, l1Coefficient=3e-4, epochs=3000, learningRate=3e-3,
    batchSize=500, lrDecay=0.05)
  assert stats.reconstructionMse < 1e-4
  assert stats.meanActiveFeatures <= 6

# Vector fields

def test_field_vanishes_for_a_model_that_does_nothing():
  e = EventScript([signalEvent(10, (3, 3), surrogate.E, 0.1, 9)])
  t = engine.rollout(surrogate.signalResponseModel(), surrogate.restState(6, 6), 300, e, recordEvery=5)
  cloud = extract.extractMacroscopic(t)
  basis = pca.pcaFit(cloud, 2)
  still = modelInit(7, 8, ChannelMode.RGB_PLAIN, fireRate=1.0)
  field = fields.fieldLines(cloud, basis, still, (6, 6, 7), steps=3)
  assert field.valid.any()
  assert not field.vectors.any()

def test_field_points_into_the_nearer_basin():
  model = surrogate.bistableModel()
  starts = [u for u in np.linspace(0.0, 1.0, 21) if abs(u - 0.5) >= 0.1]
  trajectories = [engine.rollout(model, surrogate.bistableState(4, 4, u), 60, recordEvery=5).frames for u in starts]
  frames = np.concatenate(trajectories)
  cloud = extract.extractMacroscopic(Trajectory(frames, 'RGB_PLAIN'))
  basis = pca.pcaFit(cloud, 2)
  lifter = fields.Lifter(cloud, basis, model, (4, 4, 4), steps=5)
  up = basis.project(surrogate.bistableState(4, 4, 1.0).values.reshape(1, -1))[0]
  down = basis.project(surrogate.bistableState(4, 4, 0.0).values.reshape(1, -1))[0]
  for u, attractor in ((0.7, up), (0.3, down)):
    first = len(trajectories[0]) * int(np.argmin(np.abs(np.array(starts) - u)))
    start = lifter.latent[first:first + 1]
    field = lifter.fieldAt(start)
    assert field.valid[0]
    assert float(field.vectors[0] @ (attractor - start[0])) > 0.0

def test_single_neighbour_lift_steps_to_the_next_frame():
  model = surrogate.signalResponseModel()
  e = EventScript([signalEvent(10, (3, 3), surrogate.E, 0.1, 9)])
  cloud = extract.extractMacroscopic(engine.rollout(model, surrogate.restState(6, 6), 120, e))
  lifter = fields.Lifter(cloud, pca.pcaFit(cloud, 2), model, (6, 6, 7), neighbours=1, steps=1)
  frame = 40
  start = lifter.latent[frame:frame + 1]
  states, weights, indices, valid = lifter.lift(start)
  assert valid[0] and indices[0, 0] == frame and weights[0, 0] == 1.0
  assert np.array_equal(states[0], cloud.points[frame])
  field = lifter.fieldAt(start)
  assert np.allclose(field.vectors[0], lifter.latent[frame + 1] - lifter.latent[frame], rtol=0.0, atol=1e-6)

def test_field_figure_without_arrows_is_the_scatter():
  coords = samples(25).normal(size=(20, 2))
  colours = np.full((20, 3), 0.5)
  nowhere = fields.VectorField(coords[:4], np.ones((4, 2)), np.zeros(4, dtype=bool), 1, 'interpolate')
  with tempfile.TemporaryDirectory() as d:
    def svg(name, emit, *args):
      path = os.path.join(d, name)
      emit(*args, path)
      with open(path, 'rb') as f:
        return f.read()
    scatter = svg('scatter.svg', plots.emitScatterSvg, coords, colours)
    assert b'PathCollection' in scatter
    assert svg('none.svg', plots.emitFieldSvg, None, coords, colours) == scatter
    assert svg('invalid.svg', plots.emitFieldSvg, nowhere, coords, colours) == scatter
    empty = svg('empty.svg', plots.emitScatterSvg, np.zeros((0, 2)), np.zeros((0, 3)))
    assert b'<svg' in empty and b'PathCollection' not in empty
    assert svg('empty-field.svg', plots.emitFieldSvg, None, np.zeros((0, 2)), np.zeros((0, 3))) == empty

# Pipeline

def test_empty_experiment_writes_empty_manifest():
  with tempfile.TemporaryDirectory() as d:
    e = Experiment(d)
    e.addConfig({'version': 1, 'stages': []})
    assert e.run() == []
    assert os.path.exists(os.path.join(d, 'manifest.yml'))

def test_cyclic_include_is_rejected():
  with tempfile.TemporaryDirectory() as d:
    for name, other in (('a', 'b'), ('b', 'a')):
      with open(os.path.join(d, name + '.yml'), 'w') as f:
        f.write("- %s\n" % other)
    try:
      Experiment().load(os.path.join(d, 'a.yml'))
    except ConfigError as e:
      assert "a.yml -> b.yml -> a.yml" in str(e)
    else:
      assert False, "expected ConfigError"

def test_cycle_detection_recipe_is_reproducible():
  with tempfile.TemporaryDirectory() as d:
    first = runRecipe('cycle-detection.yml', os.path.join(d, 'first'))
    second = runRecipe('cycle-detection.yml', os.path.join(d, 'second'))
    assert first.betti['diagram.csv'].h1 == 1
    written = sorted(os.listdir(first.outdir))
    assert written == sorted([a['path'] for a in first.artifacts] + ['manifest.yml'])
    for a, b in zip(first.artifacts, second.artifacts):
      assert a['path'] == b['path']
      if a['path'].endswith(('.csv', '.svg')):
        assert a['sha256'] == b['sha256'], a['path']

def test_trained_model_runs_through_the_cycle_stages():
  signals = [{'kind': 'signal', 'every': 50, 'centre': [4, 4], 'channel': 7, 'value': 1.0, 'radius': 3}]
  options = {'epochs': 5, 'steps_min': 8, 'steps_max': 8, 'batch_size': 2, 'pool_size': 4, 'signal_prob': 0.5,
    'signal_channel': 7, 'signal_radius': 3}
  with tempfile.TemporaryDirectory() as d:
    e = Experiment(d)
    e.addConfig({'version': 1, 'seed': 0, 'stages': [
      {'Target': {'out': 'green.png', 'colour': [40, 200, 60], 'size': 8, 'margin': 1}},
      {'Target': {'out': 'blue.png', 'colour': [40, 60, 220], 'size': 8, 'margin': 1}},
      {'Train': {'targets': ['green.png', 'blue.png'], 'out': 'model.ncam', 'channels': 8, 'hidden': 16,
        'options': options}},
      {'Rollout': {'model': 'model.ncam', 'out': 'traj.ncat', 'steps': 200, 'height': 8, 'width': 8,
        'recordEvery': 2, 'events': signals}},
      {'Extract': {'trajectory': 'traj.ncat', 'out': 'frames.csv', 'mode': 'macro'}},
      {'Pca': {'cloud': 'frames.csv', 'out': 'frames.pca', 'k': 2, 'coords': 'coords.csv'}},
      {'Ph': {'cloud': 'coords.csv', 'out': 'diagram.csv', 'maxDim': 1, 'budget': 100}},
    ]})
    e.run()
    trained = loadModel(os.path.join(d, 'model.ncam'))
    assert loadTrajectory(os.path.join(d, 'traj.ncat')).modelHash == modelHash(trained)
    assert e.betti['diagram.csv'].h0 >= 1

def slow_perturbation_recipes():
  with tempfile.TemporaryDirectory() as d:
    e = runRecipe('perturb-return.yml', d)
    assert e.betti['diagram.csv'].h1 >= 2
  with tempfile.TemporaryDirectory() as d:
    e = runRecipe('fig5-perturb.yml', d)
    assert e.betti['suppressed-diagram.csv'].h1 == 1
    assert e.betti['continued-diagram.csv'].h1 >= 2

def slow_training_halves_the_loss():
  target = np.zeros((8, 8, 4), dtype=np.float32)
  target[2:6, 2:6] = [0.2, 0.4, 0.9, 1.0]
  config = trainer.TrainConfig(epochs=200, batchSize=4, poolSize=64)
  _, log = trainer.train(modelInit(6, 32, seed=0), target, config)
  assert log.windowedMean(190, 200) < 0.5 * log.windowedMean(0, 10)

def slow_trained_model_cycles_and_returns():
  with tempfile.TemporaryDirectory() as d:
    e = runRecipe('fig5-trained.yml', d)
    assert e.betti['final-diagram.csv'].h1 == 1
    assert e.betti['features-diagram.csv'].h1 == 1
    assert e.betti['trained-suppressed-diagram.csv'].h1 == 1
    assert e.betti['trained-continued-diagram.csv'].h1 >= 2
