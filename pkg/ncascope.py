#!/usr/bin/env python
# Command-line interface for training neural cellular automata and analysing their trajectories.

import click
import contextlib
import logging
import os
import sys

import torch

from analysis import autoencoders, fields
from experiment import Experiment
from nca.errors import ConfigError, NcaScopeError, ValidationError
from stages import analyse, simulate

__version__ = '0.1'
HERE = os.path.dirname(os.path.abspath(__file__))

def logOptions(command):
  """ The logging flags every command takes. """
  options = [
    click.option('-q', '--quiet', 'loglevel', flag_value=logging.ERROR, help="Minimal output"),
    click.option('--normal-output', 'loglevel', flag_value=logging.WARNING, help="Normal output", default=True),
    click.option('-v', '--verbose', 'loglevel', flag_value=logging.INFO, help="More output"),
    click.option('-d', '--debug', 'loglevel', flag_value=logging.DEBUG, help="Debugging output"),
    click.option('-dd', '--debug-to-file', 'debugToFile', flag_value=True, help="Send debugging output to debug.log"),
  ]
  for option in reversed(options):
    command = option(command)
  return command

def configureLogging(loglevel, debugToFile):
  if debugToFile:
    loglevel = logging.DEBUG
    logFileName = 'debug.log'
    if os.path.exists(logFileName):
      os.remove(logFileName)
    logging.basicConfig(format='%(message)s', level=loglevel, filename=logFileName)
  else:
    logging.basicConfig(format='%(message)s', level=loglevel)

@contextlib.contextmanager
def exitCodes():
  """ Bad configuration or input exits with 2; anything that fails while running exits with 1. """
  try:
    yield
  except (ConfigError, ValidationError) as e:
    click.echo("Error: %s" % e, err=True)
    sys.exit(2)
  except (NcaScopeError, OSError) as e:
    click.echo("Error: %s" % e, err=True)
    sys.exit(1)

def seedOption(command):
  return click.option('--seed', type=int, help="Seed for this command; overrides the one given before it")(command)

def runStage(ctx, stage, seed=None):
  """ Apply one stage with paths relative to the current directory and show what it reports. """
  experiment = Experiment('.')
  if seed is None:
    seed = ctx.obj['seed']
  experiment.seed = seed if seed is not None else 0
  experiment.stages = [stage]
  experiment.validate()
  stage.apply(experiment)
  for line in experiment.reports:
    click.echo(line)

@click.group()
@click.version_option(__version__, prog_name='nca-scope')
@click.option('--seed', type=int, help="Seed for every random stream (default: the config's seed, else 0)")
@click.pass_context
def cli(ctx, seed):
  """ Train neural cellular automata and analyse the shape of their behaviour. """
  ctx.ensure_object(dict)
  ctx.obj['seed'] = seed
  threads = os.environ.get('NCASCOPE_THREADS')
  if threads:
    try:
      torch.set_num_threads(int(threads))
    except ValueError:
      raise click.UsageError("NCASCOPE_THREADS must be a positive integer, got %r" % threads)

@cli.command()
@click.option('--target', 'targets', multiple=True, required=True, type=click.Path(exists=True, dir_okay=False),
  help="Target image; repeat it for the signal-switching regime")
@click.option('--out', default='model.ncam', show_default=True, help="Model file to write")
@click.option('--config', 'configFile', type=click.File('r'), help="YAML training options (epochs, batch_size, ...)")
@click.option('--epochs', type=int, help="Overrides the configured number of epochs")
@click.option('--channels', type=int, default=16, show_default=True)
@click.option('--hidden', type=int, default=128, show_default=True, help="Hidden layer width")
@click.option('--size', type=int, help="Resize targets to SIZE x SIZE")
@click.option('--rgba', 'channelMode', flag_value='RGBA_ALIVE', default=True, help="RGBA targets; alpha decides which cells live")
@click.option('--rgb', 'channelMode', flag_value='RGB_PLAIN', help="RGB targets; every cell lives")
@click.option('--loss-log', 'lossLog', help="CSV of epoch, loss and seconds")
@seedOption
@logOptions
@click.pass_context
def train(ctx, targets, out, configFile, epochs, channels, hidden, size, channelMode, lossLog, seed, loglevel, debugToFile):
  """ Train an NCA towards one or more target images. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    options = (Experiment().parse(configFile) if configFile else None) or {}
    if not isinstance(options, dict):
      raise ValidationError("Training options must be a map, got %r" % options)
    if epochs is not None:
      options['epochs'] = epochs
    runStage(ctx, simulate.Train(list(targets), out, channels, hidden, channelMode, size, lossLog=lossLog, options=options), seed)

@cli.command()
@click.argument('name', type=click.Choice(sorted(simulate.SURROGATES)))
@click.option('--out', default='model.ncam', show_default=True)
@logOptions
@click.pass_context
def surrogate(ctx, name, out, loglevel, debugToFile):
  """ Write the hand-wired model NAME, which needs no training. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    runStage(ctx, simulate.Surrogate(out, name))

@cli.command()
@click.option('--model', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--steps', type=int, required=True)
@click.option('--out', default='traj.ncat', show_default=True)
@click.option('--events', type=click.Path(exists=True, dir_okay=False), help="JSON or YAML event script")
@click.option('--record-every', 'recordEvery', type=int, default=1, show_default=True)
@click.option('--height', type=int, default=16, show_default=True)
@click.option('--width', type=int, default=16, show_default=True)
@click.option('--initial', type=click.Choice(simulate.INITIAL), default='seed', show_default=True)
@click.option('--u', type=float, default=0.5, show_default=True, help="Starting u of the bistable state")
@click.option('--stop-signals-after', 'stopSignalsAfter', type=int, help="Drop every signal from this timestep on")
@seedOption
@logOptions
@click.pass_context
def rollout(ctx, model, steps, out, events, recordEvery, height, width, initial, u, stopSignalsAfter, seed, loglevel, debugToFile):
  """ Roll a model out and record its trajectory. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    runStage(ctx, simulate.Rollout(model, out, steps, height=height, width=width, initial=initial, u=u, events=events,
      recordEvery=recordEvery, stopSignalsAfter=stopSignalsAfter), seed)

@cli.command()
@click.option('--traj', 'trajectory', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--mode', type=click.Choice(analyse.MODES), default='macro', show_default=True)
@click.option('--out', default='cloud.csv', show_default=True)
@click.option('--max-points', 'maxPoints', type=int, help="Uniform random subset size for micro clouds")
@click.option('--keep-dead', 'keepDead', is_flag=True, help="Keep dead cells in micro clouds")
@click.option('--window', type=int, nargs=4, help="ROW0 COL0 ROW1 COL1 of the window (half-open)")
@click.option('--frames', type=int, nargs=2, help="FIRST LAST frame indices (half-open)")
@seedOption
@logOptions
@click.pass_context
def extract(ctx, trajectory, mode, out, maxPoints, keepDead, window, frames, seed, loglevel, debugToFile):
  """ Turn a trajectory into a point cloud. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    runStage(ctx, analyse.Extract(trajectory, out, mode, maxPoints, not keepDead, window or None, frames or None), seed)

@cli.command()
@click.option('--in', 'cloud', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--k', type=int, default=2, show_default=True)
@click.option('--out', default='basis.pca', show_default=True)
@click.option('--coords', help="CSV of projected coordinates")
@click.option('--svg', help="Scatter of the first two components")
@logOptions
@click.pass_context
def pca(ctx, cloud, k, out, coords, svg, loglevel, debugToFile):
  """ Fit a PCA basis to a point cloud. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    runStage(ctx, analyse.Pca(cloud, out, k, coords, svg))

@cli.command()
@click.option('--cloud', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--kind', type=click.Choice(autoencoders.KINDS), default='mlp', show_default=True)
@click.option('--latent', type=int, default=2, show_default=True)
@click.option('--hidden', type=int, multiple=True, help="Hidden width; repeat for more layers")
@click.option('--shape', type=int, nargs=3, help="H W C of a frame, for the conv kind")
@click.option('--epochs', type=int, default=2000, show_default=True)
@click.option('--lr', 'learningRate', type=float, default=1e-3, show_default=True)
@click.option('--lr-decay', 'lrDecay', type=float, help="Final learning rate as a fraction of the first")
@click.option('--out', default='model.dae', show_default=True)
@click.option('--coords', help="CSV of latent coordinates")
@click.option('--svg', help="Scatter of the latent space")
@seedOption
@logOptions
@click.pass_context
def ae(ctx, cloud, kind, latent, hidden, shape, epochs, learningRate, lrDecay, out, coords, svg, seed, loglevel, debugToFile):
  """ Train a dense autoencoder on a point cloud. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    runStage(ctx, analyse.Ae(cloud, out, kind, latent, list(hidden) or None, shape or None, epochs, learningRate,
      lrDecay=lrDecay, coords=coords, svg=svg), seed)

@cli.command()
@click.option('--cloud', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--expansion', type=int, default=64, show_default=True, help="Dictionary size over input dimension")
@click.option('--l1', 'l1Coefficient', type=float, default=1e-3, show_default=True)
@click.option('--epochs', type=int, default=1000, show_default=True)
@click.option('--lr', 'learningRate', type=float, default=1e-3, show_default=True)
@click.option('--lr-decay', 'lrDecay', type=float, help="Final learning rate as a fraction of the first")
@click.option('--out', default='model.sae', show_default=True)
@click.option('--stats', default='stats.json', show_default=True)
@seedOption
@logOptions
@click.pass_context
def sae(ctx, cloud, expansion, l1Coefficient, epochs, learningRate, lrDecay, out, stats, seed, loglevel, debugToFile):
  """ Train a sparse autoencoder on a (microscopic) point cloud. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    runStage(ctx, analyse.Sae(cloud, out, stats, expansion, l1Coefficient, epochs, learningRate, lrDecay=lrDecay), seed)

@cli.command()
@click.option('--sae', 'model', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--traj', 'trajectory', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', default='features.csv', show_default=True)
@click.option('--keep-dead', 'keepDead', is_flag=True, help="Average over dead cells too")
@logOptions
@click.pass_context
def features(ctx, model, trajectory, out, keepDead, loglevel, debugToFile):
  """ One point per frame: the mean sparse code of its live cells. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    runStage(ctx, analyse.FrameFeatures(model, trajectory, out, not keepDead))

@cli.command()
@click.option('--cloud', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--maxdim', 'maxDim', type=click.IntRange(0, 2), default=2, show_default=True)
@click.option('--budget', type=int, default=analyse.homology.DEFAULT_BUDGET, show_default=True,
  help="Maxmin-subsample larger clouds to this many points")
@click.option('--max-radius', 'maxRadius', type=float, help="Filtration ceiling (default: enclosing radius)")
@click.option('--threshold', type=float, help="Significance threshold (default: 0.3 x largest finite death)")
@click.option('--out', default='diagram.csv', show_default=True)
@click.option('--svg', help="Persistence diagram figure")
@click.option('--betti', help="JSON Betti report")
@seedOption
@logOptions
@click.pass_context
def ph(ctx, cloud, maxDim, budget, maxRadius, threshold, out, svg, betti, seed, loglevel, debugToFile):
  """ Vietoris-Rips persistent homology of a point cloud. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    runStage(ctx, analyse.Ph(cloud, out, maxDim, budget, maxRadius, threshold, svg, betti), seed)

@cli.command()
@click.option('--traj', 'trajectory', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--basis', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--model', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', default='field.svg', show_default=True)
@click.option('--csv', help="CSV of grid points and vectors")
@click.option('--resolution', type=int, default=25, show_default=True)
@click.option('--neighbours', type=int, default=20, show_default=True)
@click.option('--steps', type=int, default=5, show_default=True, help="NCA steps per vector")
@click.option('--lift', 'liftMode', type=click.Choice(fields.LIFT_MODES), default='interpolate', show_default=True)
@click.option('--temperature', type=float, help="Softmax temperature (default: median spacing / 4)")
@seedOption
@logOptions
@click.pass_context
def field(ctx, trajectory, basis, model, out, csv, resolution, neighbours, steps, liftMode, temperature, seed, loglevel, debugToFile):
  """ Field lines of a model over the PCA embedding of a trajectory. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    runStage(ctx, analyse.Field(trajectory, basis, model, out, csv, resolution, neighbours, steps, liftMode, temperature), seed)

@cli.command()
@click.option('--cloud', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', default='scatter.svg', show_default=True)
@click.option('--title')
@logOptions
@click.pass_context
def scatter(ctx, cloud, out, title, loglevel, debugToFile):
  """ Scatter the first two coordinates of a point cloud. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    runStage(ctx, analyse.Scatter(cloud, out, title))

@cli.command()
@click.argument('config', nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--outdir', help="Overrides the configured output directory")
@logOptions
@click.pass_context
def run(ctx, config, outdir, loglevel, debugToFile):
  """ Run the experiment described by one or more CONFIG files. """
  configureLogging(loglevel, debugToFile)
  with exitCodes():
    e = Experiment()
    for c in config:
      e.load(c)
    if outdir:
      e.outdir = outdir
    if e.outdir is None:
      e.outdir = 'out'
    if ctx.obj['seed'] is not None:
      e.seed = ctx.obj['seed']
    logging.info("Experiment:")
    logging.info(e)
    artifacts = e.run()
    # Report results with click rather than logging, so they're available to regression tests.
    for line in e.reports:
      click.echo(line)
    click.echo("Wrote %s artifacts; manifest in %s" % (len(artifacts), e.manifestPath()))

def recipe(name):
  return os.path.join(HERE, name)

@cli.command()
@click.option('-v/-q', '--verbose/--quiet', 'verbose')
@click.option('--slow', is_flag=True, help="Also run the training-based checks (takes many minutes)")
def test(verbose, slow):
  """ Run regression tests. """

  # Using docstrings:
  import doctest
  import experiment
  import regression_test
  from analysis import cloud, extract, fixtures, homology, pca, plots
  from nca import binfile, engine, errors, events, grid, model, rng, surrogate, trainer, trajectory
  from stages import stage
  failed = 0
  for module in [binfile, errors, grid, rng, model, events, engine, trajectory, surrogate, trainer, cloud, extract,
      pca, autoencoders, homology, fixtures, fields, plots, stage, simulate, analyse, experiment]:
    failed += doctest.testmod(module, verbose=verbose).failed
  assert failed == 0, "%s doctests failed" % failed

  # Property and oracle checks:
  for name, check in regression_test.checks(slow):
    if verbose:
      click.echo(name)
    check()

  # Test command-line interface and pipelines:
  from click.testing import CliRunner
  runner = CliRunner()
  with runner.isolated_filesystem():
    result = runner.invoke(cli, ['run', recipe('cycle-detection.yml'), '--outdir', 'cycle'])
    assert result.exit_code == 0, result.output
    assert "Betti (h0, h1, h2) = (" in result.output
    assert "manifest in cycle" in result.output

    result = runner.invoke(cli, ['ph', '--cloud', 'cycle/frames.csv', '--maxdim', '1', '--budget', '100', '--out', 'd.csv'])
    assert result.exit_code == 0, result.output
    assert "d.csv: Betti" in result.output

    result = runner.invoke(cli, ['surrogate', 'signal-response', '--out', 'm.ncam'])
    assert result.exit_code == 0, result.output
    result = runner.invoke(cli, ['rollout', '--model', 'm.ncam', '--steps', '3', '--seed', '5', '--out', 't.bin'])
    assert result.exit_code == 0, result.output
    assert trajectory.loadTrajectory('t.bin').seed == 5
    result = runner.invoke(cli, ['--seed', '4', 'rollout', '--model', 'm.ncam', '--steps', '3', '--seed', '5',
      '--initial', 'rest', '--out', 'u.ncat'])
    assert result.exit_code == 0, result.output
    assert trajectory.loadTrajectory('u.ncat').seed == 5
    result = runner.invoke(cli, ['--seed', '4', 'rollout', '--model', 'm.ncam', '--steps', '3', '--initial', 'rest',
      '--out', 'v.ncat'])
    assert result.exit_code == 0, result.output
    assert trajectory.loadTrajectory('v.ncat').seed == 4

    result = runner.invoke(cli, ['pca', '--in', 'cycle/frames.csv', '--k', '1000'])
    assert result.exit_code == 2
    assert "too large" in result.output

    result = runner.invoke(cli, ['run', 'missing.yml'])
    assert result.exit_code == 2

    with open('dangling.yml', 'w') as f:
      f.write("stages:\n- Pca: {cloud: nothing.csv}\n")
    result = runner.invoke(cli, ['run', 'dangling.yml'])
    assert result.exit_code == 2
    assert "nothing.csv" in result.output

    with open('failing.yml', 'w') as f:
      f.write("outdir: cycle\nstages:\n- Pca: {cloud: frames.csv, out: big.pca, k: 1000}\n")
    result = runner.invoke(cli, ['run', 'failing.yml'])
    assert result.exit_code == 1
    assert "Stage Pca failed" in result.output

    if slow:
      for name in ['perturb-return.yml', 'fig5-perturb.yml', 'fig8-texture-window.yml', 'fig5-trained.yml']:
        result = runner.invoke(cli, ['run', recipe(name), '--outdir', name[:-4]])
        assert result.exit_code == 0, result.output

  click.echo("All tests passed.")

if __name__ == "__main__":
  cli()
