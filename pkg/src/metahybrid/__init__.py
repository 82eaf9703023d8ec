"""Meta-hybrid recommender toolkit.

Trains a set of rating-prediction recommenders, builds a per-user context
model, learns a random-forest classifier that picks the best recommender
for each user, and evaluates the resulting meta-hybrid (and its oracle
upper bound) against every single recommender.
"""

__version__ = "0.1.0"
