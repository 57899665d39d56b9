"""stratsim: usuários ingênuos e estratégicos diante de plataformas bayesianas.

Simula o jogo repetido, calcula conjuntos de crenças estáveis, resolve o
problema max-min do usuário estratégico e audita a confiabilidade do algoritmo.
"""

__version__ = "0.1.0"
