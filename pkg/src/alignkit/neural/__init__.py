"""Model, losses, optimizer schedule, checkpoint format and the re-scoring teacher."""
