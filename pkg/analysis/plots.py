""" Static SVG figures: latent scatters, persistence diagrams and field lines.

    Output bytes depend only on the inputs: the Agg backend, a fixed hash salt for SVG ids
    and no date stamp.
"""

import logging

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from nca.errors import ContractError

matplotlib.rcParams['svg.hashsalt'] = 'ncascope'
matplotlib.rcParams['svg.fonttype'] = 'none'

DIM_COLOURS = {0: '#1f77b4', 1: '#d62728', 2: '#2ca02c'}
ARROW_SCALE = 1.0  # drawn arrow = ARROW_SCALE * field vector, in latent units
MARKER_SIZE = 12

def save(figure, path):
  figure.savefig(path, format='svg', metadata={'Date': None})
  plt.close(figure)
  logging.info("Wrote %s", path)

def emitScatterSvg(coords, colours, path, title=None):
  """ One marker per point, filled with the point's colour (clamped to [0, 1]). """
  coords = np.asarray(coords, dtype=np.float64)
  if coords.ndim != 2 or coords.shape[1] < 2:
    raise ContractError("A scatter needs N x 2 coordinates, got %s" % (coords.shape,))
  figure, axes = plt.subplots(figsize=(5, 5))
  if len(coords):
    axes.scatter(coords[:, 0], coords[:, 1], c=np.clip(colours, 0.0, 1.0), s=MARKER_SIZE, edgecolors='none')
  axes.set_xlabel('component 1')
  axes.set_ylabel('component 2')
  if title:
    axes.set_title(title)
  save(figure, path)

def emitDiagramSvg(diagram, path, title=None):
  """ Birth against death with the diagonal; essential classes sit on a dashed line above the rest. """
  figure, axes = plt.subplots(figsize=(5, 5))
  deaths = diagram.deaths
  finite = deaths[np.isfinite(deaths)]
  top = max([float(finite.max()) if len(finite) else 0.0, float(diagram.births.max()) if len(diagram) else 0.0, 1e-9])
  ceiling = 1.1 * top
  axes.plot([0, ceiling], [0, ceiling], color='#888888', linewidth=0.8)
  axes.axhline(ceiling, color='#888888', linewidth=0.8, linestyle='--')
  for dim in range(3):
    part = diagram.inDim(dim)
    if len(part):
      y = np.where(np.isfinite(part.deaths), part.deaths, ceiling)
      axes.scatter(part.births, y, s=MARKER_SIZE, color=DIM_COLOURS[dim], label='H%s' % dim)
  axes.set_xlim(-0.02 * ceiling, 1.05 * ceiling)
  axes.set_ylim(-0.02 * ceiling, 1.05 * ceiling)
  axes.set_xlabel('birth')
  axes.set_ylabel('death')
  if len(diagram):
    axes.legend(loc='lower right')
  if title:
    axes.set_title(title)
  save(figure, path)

def emitFieldSvg(field, coords, colours, path, title=None):
  """ The latent scatter with an arrow from every valid grid point. """
  coords = np.asarray(coords, dtype=np.float64)
  figure, axes = plt.subplots(figsize=(5, 5))
  if len(coords):
    axes.scatter(coords[:, 0], coords[:, 1], c=np.clip(colours, 0.0, 1.0), s=MARKER_SIZE, edgecolors='none')
  if field is not None and field.valid.any():
    start = field.grid[field.valid]
    arrows = ARROW_SCALE * field.vectors[field.valid]
    axes.quiver(start[:, 0], start[:, 1], arrows[:, 0], arrows[:, 1],
      angles='xy', scale_units='xy', scale=1.0, width=0.003, color='#333333')
  axes.set_xlabel('component 1')
  axes.set_ylabel('component 2')
  if title:
    axes.set_title(title)
  save(figure, path)
