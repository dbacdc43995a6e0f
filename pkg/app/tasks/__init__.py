# Batch jobs
