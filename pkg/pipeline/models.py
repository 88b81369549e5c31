from django.db import models


class PipelineRun(models.Model):
    """One invocation of a pipeline stage"""

    subcommand = models.CharField(max_length=32)
    parameters = models.JSONField(default=dict)
    manifest_digest = models.CharField(max_length=64, blank=True)
    exit_code = models.IntegerField()
    message = models.TextField(blank=True)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f'{self.subcommand} - exit {self.exit_code}'

    @property
    def succeeded(self):
        return self.exit_code == 0
