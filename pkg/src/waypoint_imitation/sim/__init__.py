"""Kinematic arm simulator: arm model, world stepping and depth rendering."""

from .arm import ArmModel, forward_kinematics, inverse_kinematics, jacobian
from .render import DepthImage, render_depth, render_scene, save_pgm
from .world import Action, SimConfig, SimState, Simulator, attachment_labels


def step(state, action, sim=None):
    return (sim or Simulator()).step(state, action)
