from .export import export_plot_data, load_campaign_records
from .presets import preset, preset_names
from .runner import CampaignSummary, RunResult, real_map_campaign, run_campaign, wilson_interval
from .spec import CampaignCell, CampaignKind, CampaignSpec, load_campaign_spec
from .validation import (
    ValidationReport,
    ValidationSettings,
    ValidationSeverity,
    validate_found_map,
)

__all__ = [
    'CampaignCell',
    'CampaignKind',
    'CampaignSpec',
    'CampaignSummary',
    'RunResult',
    'ValidationReport',
    'ValidationSettings',
    'ValidationSeverity',
    'export_plot_data',
    'load_campaign_records',
    'load_campaign_spec',
    'preset',
    'preset_names',
    'real_map_campaign',
    'run_campaign',
    'validate_found_map',
    'wilson_interval',
]
