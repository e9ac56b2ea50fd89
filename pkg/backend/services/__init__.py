# Serviços do simulador
