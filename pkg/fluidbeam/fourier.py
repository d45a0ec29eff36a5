"""
Фурье-формирование луча: веса по замкнутой формуле, 2-D ДПФ и
итеративное восстановление фазы желаемого луча.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import fft
from tqdm import tqdm

from .beam_spec import BeamPattern, matricize, vectorize
from .errors import ParameterError
from .steering import SteeringDictionary, VMode, direction_cosines

logger = logging.getLogger(__name__)

# Порты обрабатываются блоками, чтобы матрица фаз Z_nz×K не разрасталась
_PORT_CHUNK = 256


@dataclass(frozen=True)
class WeightVector:
    """Комплексные веса портов; support - индексы портов, если веса частичные"""

    values: np.ndarray
    support: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if not np.all(np.isfinite(values)):
            raise ParameterError("Веса содержат бесконечные или NaN значения")
        object.__setattr__(self, "values", values)
        if self.support is not None:
            support = np.asarray(self.support, dtype=np.int64)
            if support.shape != values.shape:
                raise ParameterError("Длина support не совпадает с числом весов")
            if np.unique(support).size != support.size:
                raise ParameterError("Индексы support должны быть уникальными")
            object.__setattr__(self, "support", support)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.values)


def weights_from_beam(
    beam: BeamPattern,
    positions: np.ndarray,
    wavelength: float,
    vmode: VMode = VMode.DECOUPLED,
    support=None,
) -> WeightVector:
    """
    Замкнутая формула: w(m,n) = Σ_p Σ_q G(p,q)·exp{+j(2π/λ)(u·x_m + v·y_n)}.

    Прямое суммирование по неравномерным позициям портов; нулевые
    элементы G пропускаются.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(positions)):
        raise ParameterError("Позиции портов должны быть конечными")
    if not wavelength > 0:
        raise ParameterError(f"Длина волны должна быть положительной: {wavelength}")

    g = vectorize(beam)
    nz = np.flatnonzero(g)
    weights = np.zeros(positions.shape[0], dtype=np.complex128)
    if nz.size:
        phi_z, theta_z = beam.grid.flat_angles()
        u, v = direction_cosines(phi_z[nz], theta_z[nz], vmode)
        k = 2 * np.pi / wavelength
        g_nz = g[nz]
        for start in range(0, positions.shape[0], _PORT_CHUNK):
            chunk = positions[start:start + _PORT_CHUNK]
            phase = k * (np.outer(u, chunk[:, 0]) + np.outer(v, chunk[:, 1]))
            weights[start:start + chunk.shape[0]] = g_nz @ np.exp(1j * phase)

    return WeightVector(weights, support)


def dft2_forward(W: np.ndarray) -> np.ndarray:
    """Ненормированное прямое 2-D ДПФ"""
    return fft.fft2(np.asarray(W, dtype=np.complex128))


def dft2_inverse(G: np.ndarray) -> np.ndarray:
    """Обратное 2-D ДПФ с множителем 1/(P·Q)"""
    return fft.ifft2(np.asarray(G, dtype=np.complex128))


def aperture_mask(shape: Tuple[int, int], side: int, block_shift: str = "center") -> np.ndarray:
    """
    Маска апертуры side×side в немодифицированных координатах ДПФ.

    center - центральный блок после fftshift (нулевая частота в середине),
    corner - левый верхний блок без сдвига.
    """
    P, Q = shape
    if side < 1 or side > min(P, Q):
        raise ParameterError(f"Апертура {side}×{side} не помещается в сетку {P}×{Q}")
    mask = np.zeros(shape, dtype=bool)
    if block_shift == "corner":
        mask[:side, :side] = True
        return mask
    if block_shift != "center":
        raise ParameterError(f"Неизвестный вариант блока: {block_shift}")
    r0, c0 = P // 2 - side // 2, Q // 2 - side // 2
    mask[r0:r0 + side, c0:c0 + side] = True
    return fft.ifftshift(mask)


def project_to_aperture(G: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """F{ обрезка(F^-1{G}) } - ортогональная проекция на лучи апертуры"""
    W_p = dft2_inverse(G)
    return dft2_forward(np.where(mask, W_p, 0))


def aperture_residual(target_magnitude: np.ndarray, G: np.ndarray, mask: np.ndarray) -> float:
    """‖ |G_desired| - |F{W_c}| ‖₂"""
    return float(np.linalg.norm(target_magnitude - np.abs(project_to_aperture(G, mask))))


def _check_aperture_size(active: int, shape: Tuple[int, int]) -> int:
    side = math.isqrt(active) if active > 0 else 0
    if side < 1 or side * side != active:
        raise ParameterError(f"S={active} не является полным квадратом")
    if side > min(shape):
        raise ParameterError(f"sqrt(S)={side} больше min(P, Q)={min(shape)}")
    return side


def phase_retrieve(
    beam: BeamPattern,
    active: int,
    iters: int,
    block_shift: str = "center",
    early_stop: bool = False,
    tolerance: float = 1e-6,
    return_history: bool = False,
    progress: bool = False,
) -> Union[BeamPattern, Tuple[BeamPattern, List[float]]]:
    """
    Итеративное уточнение фазы желаемого луча под апертуру sqrt(S)×sqrt(S).

    Каждая итерация: W_p = F^-1{G}, оставить блок W_c, G~ = F{W_c},
    G = |G_desired|·exp(j∠G~). history[t] - невязка апертуры после t итераций.
    """
    side = _check_aperture_size(active, beam.grid.shape)
    if iters < 0:
        raise ParameterError(f"Число итераций не может быть отрицательным: {iters}")

    target = beam.magnitude
    mask = aperture_mask(beam.grid.shape, side, block_shift)
    G = beam.values
    history: List[float] = []

    for it in tqdm(range(iters), desc="phase retrieval", disable=not progress, leave=False):
        G_tilde = project_to_aperture(G, mask)
        history.append(float(np.linalg.norm(target - np.abs(G_tilde))))
        G = target * np.exp(1j * np.angle(G_tilde))

        if it % 10 == 0:
            logger.debug(f"Итерация {it}: невязка апертуры {history[-1]:.6e}")
        if early_stop and it > 0 and history[-2] > 0:
            if (history[-2] - history[-1]) / history[-2] < tolerance:
                logger.info(f"Ранняя остановка на итерации {it + 1}")
                break

    result = BeamPattern(beam.grid, G)
    if return_history:
        history.append(aperture_residual(target, G, mask))
        logger.info(f"Восстановление фазы: {len(history) - 1} итераций, невязка {history[-1]:.6e}")
        return result, history
    return result


def energy_matched_residual(target_magnitude: np.ndarray, realized: np.ndarray) -> float:
    """‖ |G_desired| - c·|G~| ‖₂ при c = ‖G_desired‖ / ‖G~‖ (масштаб D·D^H произволен)"""
    energy = float(np.linalg.norm(realized))
    scale = float(np.linalg.norm(target_magnitude)) / energy if energy > 0 else 0.0
    return float(np.linalg.norm(target_magnitude - scale * np.abs(realized)))


def phase_retrieve_on_array(
    beam: BeamPattern,
    dictionary: SteeringDictionary,
    iters: int,
    early_stop: bool = False,
    tolerance: float = 1e-6,
    return_history: bool = False,
    progress: bool = False,
) -> Union[BeamPattern, Tuple[BeamPattern, List[float]]]:
    """
    Тот же цикл, но пара преобразований - сам словарь решетки.

    W = D^H·g (замкнутая формула весов), G~ = D·W (синтез луча), затем
    G = |G_desired|·exp(j∠G~). Апертура - реальные позиции портов, а не
    блок индексов ДПФ, поэтому неравномерность (u, v) учитывается точно.
    """
    if not beam.grid.same_as(dictionary.angles):
        raise ParameterError("Луч и словарь заданы на разных угловых сетках")
    if iters < 0:
        raise ParameterError(f"Число итераций не может быть отрицательным: {iters}")

    g = vectorize(beam)
    target_flat = np.abs(g)
    history: List[float] = []

    for it in tqdm(range(iters), desc="phase retrieval", disable=not progress, leave=False):
        realized = dictionary.synthesize(dictionary.correlate(g))
        history.append(energy_matched_residual(target_flat, realized))
        g = target_flat * np.exp(1j * np.angle(realized))

        if it % 10 == 0:
            logger.debug(f"Итерация {it}: невязка апертуры {history[-1]:.6e}")
        if early_stop and it > 0 and history[-2] > 0:
            if (history[-2] - history[-1]) / history[-2] < tolerance:
                logger.info(f"Ранняя остановка на итерации {it + 1}")
                break

    result = matricize(g, beam.grid)
    if not return_history:
        return result
    history.append(energy_matched_residual(target_flat, dictionary.synthesize(dictionary.correlate(g))))
    logger.info(
        f"Восстановление фазы на апертуре {dictionary.ports.rows}×{dictionary.ports.cols}: "
        f"{len(history) - 1} итераций, невязка {history[-1]:.6e}"
    )
    return result, history
