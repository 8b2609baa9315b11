import logging

class Stage:
  """ One step of an experiment: simulate, extract, project, or measure topology.

      apply() reads files from the experiment's output directory and writes new ones
      next to them. A stage that measures something reports one line, which the
      command line echoes after the run.

      Paths given to a stage are relative to the output directory.
      A stage lists them in inputs() and outputs() so that the experiment
      can check, before anything runs, that every input is written by an
      earlier stage or already exists.
  """
  def __init__(self, **kwargs):
    pass

  def __str__(self):
    return self.__class__.__name__

  def inputs(self):
    """ Paths this stage reads. """
    return []

  def outputs(self):
    """ Paths this stage writes; each one ends up in the manifest. """
    return []

  def apply(self, experiment):
    """ Run this stage against the given experiment.
        Default behavior is to do nothing.
    """
    logging.debug("Nothing to do for %s", self)

  def seedFor(self, experiment):
    """ The stage's own seed if it has one, else the experiment's. """
    seed = getattr(self, 'seed', None)
    return experiment.seed if seed is None else int(seed)

def present(*paths):
  """ The paths that were given.
      >>> present('a.csv', None, 'b.svg')
      ['a.csv', 'b.svg']
  """
  return [p for p in paths if p]
