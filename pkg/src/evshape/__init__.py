"""evshape: mesh reconstruction from simulated monocular event-camera orbits.

Pipeline: render an orbit of a textured object, convert the intensity video
to an event stream via the contrast-threshold model, bin events into
count-based histogram frames, extract (or take oracle) silhouettes, and
deform a template sphere under multi-view silhouette losses with a
differentiable soft rasterizer. A visual-hull voxel baseline and the full
metric suite are included.
"""

__version__ = "0.1.0"
