"""Исключения библиотеки синтеза диаграмм направленности"""


class BeamformingError(Exception):
    """Базовая ошибка fluidbeam"""

    exit_code = 1


class ParameterError(BeamformingError, ValueError):
    """Недопустимые параметры, индексы или несовпадение сеток"""

    exit_code = 2


class ConfigError(ParameterError):
    """Ошибка файла конфигурации или флагов командной строки"""


class DegenerateRegionError(ParameterError):
    """Целевая область не содержит ни одной точки угловой сетки"""


class CapacityError(BeamformingError, MemoryError):
    """Плотный словарь не помещается в лимит памяти"""

    exit_code = 2


class InfeasibleSpacingError(BeamformingError):
    """Кандидаты закончились раньше, чем выбрано S портов"""

    exit_code = 3

    def __init__(self, achieved: int, requested: int, message: str = None):
        self.achieved = achieved
        self.requested = requested
        super().__init__(
            message
            or f"Ограничение d_min не позволяет выбрать {requested} портов: выбрано {achieved}"
        )


class DegenerateBeamError(BeamformingError):
    """Нулевая диаграмма там, где требуется ненулевая"""

    exit_code = 4


def with_context(error: BeamformingError, context: str) -> BeamformingError:
    """Та же ошибка того же класса, но с префиксом контекста в сообщении"""
    if isinstance(error, InfeasibleSpacingError):
        return InfeasibleSpacingError(
            error.achieved, error.requested, f"{context}: {error}"
        )
    return type(error)(f"{context}: {error}")
