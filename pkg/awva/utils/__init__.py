# Utility helpers shared by the simulator modules
