"""robustamc: adversarially robust automatic modulation classification.

Offline: adversarial and meta-adversarial training over a pool of
(attack method, substitute model) tasks. Online: few-shot fine-tuning or
semi-supervised domain-adversarial adaptation against an unseen attack in a
shifted channel. Plus the signal simulator, attack implementations, and the
experiment grid/report tooling that ties it together.
"""

__version__ = "0.1.0"
