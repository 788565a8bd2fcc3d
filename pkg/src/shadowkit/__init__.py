"""Shadow detection toolkit for agro-photovoltaic scenes.

Everything runs at desk scale on the CPU: a small reverse-mode autodiff
engine (`autodiff`), the three model families and their training loops
(`models`, `training`), a synthetic scene generator with exact ground truth
plus augmentation and dataset I/O (`data`), detection/segmentation metrics
(`metrics`), and a CLI that ties it together (`cli`).
"""

__version__ = "0.1.0"
