# Predicción de vida útil remanente con PINN meta-aprendida
