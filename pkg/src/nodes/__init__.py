# Nodos del workflow
