from typing import Dict

from rest_framework import serializers

from . import conf
from .det_equiv import RidgeConfig
from .problem_instance import INFINITY, ParameterError, PowerLawProblem, \
    is_infinite, make_power_law

_INFINITE_WORDS = ('inf', 'infinity')

# Short spellings accepted for parameter keys
ALIASES = {'lambda': 'lam', 'p': 'p_trunc'}


def normalize_params(params: Dict) -> Dict:
    """ Accepts hyphenated keys and the ALIASES spellings, drops keys
    without a value. """
    result = {}
    for key, value in params.items():
        if value is None:
            continue
        key = key.strip().replace('-', '_')
        result[ALIASES.get(key, key)] = value
    return result


def _is_infinite_word(data) -> bool:
    return is_infinite(data) or (
        isinstance(data, str) and data.strip().lower() in _INFINITE_WORDS)


class SizeField(serializers.Field):
    """ Dataset size: a positive integer, or 'inf' where allowed. """

    default_error_messages = {
        'invalid': 'Expected a positive integer or "inf".',
        'finite': 'A finite dataset size is required.',
    }

    def __init__(self, allow_infinite: bool = True, **kwargs):
        self.allow_infinite = allow_infinite
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if _is_infinite_word(data):
            if not self.allow_infinite:
                self.fail('finite')
            return INFINITY
        try:
            value = float(data)
        except (TypeError, ValueError):
            self.fail('invalid')
        if not value.is_integer() or value < 1:
            self.fail('invalid')
        return int(value)

    def to_representation(self, value):
        return 'inf' if is_infinite(value) else int(value)


class ThresholdField(serializers.Field):
    """ Safety threshold: a positive real or 'inf'. """

    default_error_messages = {
        'invalid': 'Expected a positive number or "inf".',
    }

    def to_internal_value(self, data):
        if _is_infinite_word(data):
            return INFINITY
        try:
            value = float(data)
        except (TypeError, ValueError):
            self.fail('invalid')
        if not value > 0 or value == float('inf'):
            self.fail('invalid')
        return value

    def to_representation(self, value):
        return 'inf' if is_infinite(value) else value


class GridField(serializers.Field):
    """ Geometric grid of dataset sizes written as lo:hi:points. """

    default_error_messages = {
        'invalid': 'Expected lo:hi:points with 1 <= lo < hi and points >= 2.',
    }

    def to_internal_value(self, data):
        try:
            lo, hi, points = (float(part) for part in str(data).split(':'))
        except ValueError:
            self.fail('invalid')
        if not (1 <= lo < hi and points >= 2 and points.is_integer()):
            self.fail('invalid')
        return lo, hi, int(points)

    def to_representation(self, value):
        return '{}:{}:{}'.format(*value)


class ProblemSerializer(serializers.Serializer):
    """ Power-law problem parameters; adds the built problem to the
    validated data. """

    gamma = serializers.FloatField()
    delta = serializers.FloatField()
    rho = serializers.FloatField()
    p_trunc = serializers.IntegerField(
        min_value=1, default=lambda: conf.get('P_TRUNC'))

    def validate(self, attrs):
        try:
            attrs['problem'] = PowerLawProblem.from_params(attrs)
        except ParameterError as error:
            raise serializers.ValidationError(str(error))
        return attrs


class KappaSerializer(serializers.Serializer):
    """ Only the eigenvalue decay enters the fixed point. """

    gamma = serializers.FloatField()
    lam = serializers.FloatField(min_value=0)
    n = SizeField(allow_infinite=False)
    p_trunc = serializers.IntegerField(
        min_value=1, default=lambda: conf.get('P_TRUNC'))

    def validate(self, attrs):
        try:
            attrs['problem'] = make_power_law(
                attrs['gamma'], 1.0, 0.0, attrs['p_trunc'])
        except ParameterError as error:
            raise serializers.ValidationError(str(error))
        return attrs


class DetEquivSerializer(ProblemSerializer):
    n = SizeField()
    alpha = serializers.FloatField(min_value=0, max_value=1)
    lam = serializers.FloatField(min_value=0)
    objective = serializers.ChoiceField(choices=['l1', 'l2'], default='l1')

    def validate(self, attrs):
        attrs = super().validate(attrs)
        try:
            attrs['config'] = RidgeConfig(
                attrs['n'], attrs['alpha'], attrs['lam'])
        except ParameterError as error:
            raise serializers.ValidationError(str(error))
        return attrs


class ScalingCurveSerializer(ProblemSerializer):
    objective = serializers.ChoiceField(
        choices=['loss', 'excess'], default='loss')
    alpha = serializers.FloatField(min_value=0.5, max_value=1)
    n_grid = GridField()

    def validate(self, attrs):
        attrs = super().validate(attrs)
        if attrs['objective'] == 'excess' and attrs['alpha'] < 0.75:
            raise serializers.ValidationError(
                {'alpha': 'The excess objective needs alpha >= 0.75.'})
        return attrs


class EntryThresholdSerializer(ProblemSerializer):
    """ Safety thresholds are multiples of L* unless tau_scale is
    'absolute'. """

    mode = serializers.ChoiceField(
        choices=['warmup', 'finite', 'constrained', 'search'])
    safety_model = serializers.ChoiceField(
        choices=['simple', 'det'], default='simple')
    tau_scale = serializers.ChoiceField(
        choices=['lstar', 'absolute'], default='lstar')
    tau_i = ThresholdField()
    tau_e = ThresholdField(default=INFINITY)
    n_i = SizeField(default=INFINITY)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        mode = attrs['mode']
        if mode == 'finite' and is_infinite(attrs['n_i']):
            raise serializers.ValidationError(
                {'n_i': 'The finite mode needs a finite incumbent size.'})
        if mode == 'constrained':
            if is_infinite(attrs['tau_e']) or is_infinite(attrs['tau_i']) \
                    or attrs['tau_e'] <= attrs['tau_i']:
                raise serializers.ValidationError(
                    {'tau_e': 'The constrained mode needs a finite tau_e '
                              'above tau_i.'})
        if attrs['safety_model'] == 'det' and attrs['problem'].delta > 1:
            raise serializers.ValidationError(
                {'delta': 'The det safety model needs delta <= 1.'})
        return attrs


class ValidateSerializer(ProblemSerializer):
    n = SizeField(allow_infinite=False)
    alpha = serializers.FloatField(min_value=0, max_value=1)
    lam = serializers.FloatField(min_value=0)
    p_sim = serializers.IntegerField(
        min_value=1, default=lambda: conf.get('P_SIM'))
    trials = serializers.IntegerField(min_value=2, default=200)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1,
                                    default=0)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        if attrs['p_sim'] > attrs['p_trunc']:
            raise serializers.ValidationError(
                {'p_sim': 'p_sim must not exceed p_trunc.'})
        try:
            attrs['config'] = RidgeConfig(
                attrs['n'], attrs['alpha'], attrs['lam'])
        except ParameterError as error:
            raise serializers.ValidationError(str(error))
        return attrs


class FiguresSerializer(serializers.Serializer):
    which = serializers.ChoiceField(
        choices=['warmup', 'scaling', 'finite', 'constrained', 'all'],
        default='all')
    output_dir = serializers.CharField()
    p_trunc = serializers.IntegerField(
        min_value=1, default=lambda: conf.get('P_TRUNC'))


SERIALIZERS = {
    'kappa': KappaSerializer,
    'detequiv': DetEquivSerializer,
    'scaling-curve': ScalingCurveSerializer,
    'entry-threshold': EntryThresholdSerializer,
    'validate': ValidateSerializer,
    'figures': FiguresSerializer,
}
