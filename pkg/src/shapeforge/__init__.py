"""shapeforge: grammar-driven generative product shape design.

Pipeline: a textual shape grammar defines the design-solution space,
multi-designer sessions collect seed designs, a conditional convolutional
GAN expands them into a large corpus, a Bayesian criteria network filters
the expansion, and a grammar-constrained sequence completer recommends
valid ways to finish partial designs.
"""

__version__ = "0.1.0"
