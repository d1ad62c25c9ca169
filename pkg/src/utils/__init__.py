# Utilidades: logging, semillas y checkpoints
